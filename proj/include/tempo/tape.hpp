// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Record-and-replay reverse-mode tape.
//
// Ops append nodes during the forward pass; each node carries the stashes its
// backward needs. A stash is either materialized (a live tensor, charged to
// the ledger when recorded) or recomputable (a recipe that rebuilds the
// tensor on demand during backward; only its retained ingredients are
// charged). backward() walks the tape once in reverse, accumulates gradients
// at fan-out, and releases every node's charges as soon as that node's
// backward completes, so the ledger peak reflects the true high-water mark.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tempo/ledger.hpp"
#include "tempo/tensor.hpp"

namespace tempo {

// Instructions for rebuilding a tensor during backward. Tensor ingredients
// are held weakly: if one dies before materialization, that is a lifecycle
// bug and materialization throws. Masks and scalars are retained by value
// (they are the cheap part a recompute strategy keeps).
struct RecomputeRecipe {
    std::string rule;
    std::vector<std::weak_ptr<Tensor::Storage>> sources;
    std::vector<BoolMask> masks;
    std::map<std::string, double> scalars;
    Shape result_shape;
    Dtype result_dtype = Dtype::F64;

    // Locks every source; throws LifecycleError if any was freed.
    std::vector<Tensor> lock_sources() const;
};

using RecomputeFn = std::function<Tensor(const RecomputeRecipe&)>;

// Rule ids are global; re-registering an id replaces the rule.
void register_recompute_rule(const std::string& id, RecomputeFn fn);
bool has_recompute_rule(const std::string& id);
// Throws ConfigError for an unregistered rule id.
Tensor run_recompute_rule(const RecomputeRecipe& recipe);

class LazyStash {
public:
    static LazyStash materialized(std::string tag, StashRole role, Tensor t,
                                  bool charged = true);
    static LazyStash recomputable(std::string tag, StashRole role,
                                  RecomputeRecipe recipe);

    bool is_materialized() const { return value_.has_value(); }
    const std::string& tag() const { return tag_; }
    StashRole role() const { return role_; }
    // Whether record() charges this stash to the ledger. Uncharged stashes
    // model bookkeeping the accounting deliberately ignores.
    bool charged() const { return charged_; }
    const Tensor& stored() const;
    const RecomputeRecipe& recipe() const;

private:
    std::string tag_;
    StashRole role_ = StashRole::OpOwnStash;
    bool charged_ = true;
    std::optional<Tensor> value_;
    std::optional<RecomputeRecipe> recipe_;
};

// The held tensor, running the recompute recipe if needed.
Tensor materialize(const LazyStash& stash);

using NodeId = std::int32_t;

class BackwardCtx;

// Returns one gradient per input, in input order. An undefined Tensor means
// "no gradient for this input".
using BackwardFn = std::function<std::vector<Tensor>(BackwardCtx&)>;

struct TapeNode {
    std::string op;
    std::string tag;  // display / ledger attribution name
    std::vector<NodeId> inputs;
    std::vector<LazyStash> stashes;
    BackwardFn backward;  // empty for leaves
    Tensor value;
    // Ledger identities charged on this node's behalf, released after its
    // backward completes.
    std::vector<const void*> charged;
    // Present when consumers may hold this node's output as a recomputable
    // stash instead of a materialized one.
    std::optional<RecomputeRecipe> output_recipe;
};

class GradientMap {
public:
    explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
    bool has(NodeId id) const;
    const Tensor& at(NodeId id) const;

private:
    std::vector<Tensor> grads_;
};

class Tape {
public:
    explicit Tape(StashLedger* ledger = nullptr) : ledger_(ledger) {}

    NodeId leaf(Tensor value, std::string tag);
    NodeId record(std::string op, std::string tag, std::vector<NodeId> inputs,
                  Tensor value, std::vector<LazyStash> stashes,
                  BackwardFn backward);

    // Charge an extra retained object (e.g. a dropout mask held in the
    // node's closure) against the node's lifetime.
    void charge(NodeId id, const std::string& tag, StashRole role,
                const BoolMask& m);
    void charge(NodeId id, const std::string& tag, StashRole role,
                const Tensor& t);

    void set_output_recipe(NodeId id, RecomputeRecipe recipe);

    std::size_t size() const { return nodes_.size(); }
    const TapeNode& node(NodeId id) const;
    const Tensor& value(NodeId id) const;
    StashLedger* ledger() { return ledger_; }
    bool backward_done() const { return backward_done_; }

    // Single reverse sweep from `root`, seeded with d(out)/d(root) = seed.
    // A second call, like recording after the first, is a state error.
    GradientMap backward(NodeId root, Tensor seed);

private:
    std::vector<TapeNode> nodes_;
    StashLedger* ledger_ = nullptr;
    bool backward_done_ = false;

    TapeNode& node_mut(NodeId id);
    void check_node_id(NodeId id) const;

    friend class BackwardCtx;
};

// Handed to BackwardFn; resolves stashes (recomputing and ledger-charging
// temporaries on demand) and exposes input values for parameter reads.
class BackwardCtx {
public:
    const Tensor& grad_out() const { return grad_out_; }
    // Stash i of the node, materializing a recomputable stash on first use.
    const Tensor& stash(std::size_t i);
    // Value of the node's i-th input (for weights and other leaves).
    const Tensor& input_value(std::size_t i) const;
    const Tensor& node_value() const;

private:
    BackwardCtx(Tape* tape, NodeId id, const Tensor& grad_out);
    // Frees recompute temporaries charged by stash().
    void release_temps();

    Tape* tape_;
    NodeId id_;
    const Tensor& grad_out_;
    std::vector<Tensor> cache_;
    std::vector<const void*> temp_idents_;

    friend class Tape;
};

}  // namespace tempo
