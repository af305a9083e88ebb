// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/tape.hpp"

#include <unordered_map>

#include "tempo/kernels.hpp"

namespace tempo {

namespace {

std::unordered_map<std::string, RecomputeFn>& rule_registry() {
    static std::unordered_map<std::string, RecomputeFn> registry;
    return registry;
}

}  // namespace

void register_recompute_rule(const std::string& id, RecomputeFn fn) {
    rule_registry()[id] = std::move(fn);
}

bool has_recompute_rule(const std::string& id) {
    return rule_registry().count(id) != 0;
}

Tensor run_recompute_rule(const RecomputeRecipe& recipe) {
    auto it = rule_registry().find(recipe.rule);
    if (it == rule_registry().end()) {
        throw ConfigError("unknown recompute rule '" + recipe.rule + "'");
    }
    Tensor t = it->second(recipe);
    if (!shape_eq(t.shape(), recipe.result_shape)) {
        throw InvariantError("recompute rule '" + recipe.rule +
                             "' produced shape " + shape_str(t.shape()) +
                             ", expected " + shape_str(recipe.result_shape));
    }
    return t;
}

std::vector<Tensor> RecomputeRecipe::lock_sources() const {
    std::vector<Tensor> out;
    out.reserve(sources.size());
    for (const auto& w : sources) {
        auto s = w.lock();
        if (!s) {
            throw LifecycleError("recompute source for rule '" + rule +
                                 "' was freed before backward");
        }
        out.push_back(Tensor::from_storage(std::move(s)));
    }
    return out;
}

LazyStash LazyStash::materialized(std::string tag, StashRole role, Tensor t,
                                  bool charged) {
    if (!t.defined()) {
        throw ParamError("materialized stash '" + tag + "' needs a tensor");
    }
    LazyStash s;
    s.tag_ = std::move(tag);
    s.role_ = role;
    s.charged_ = charged;
    s.value_ = std::move(t);
    return s;
}

LazyStash LazyStash::recomputable(std::string tag, StashRole role,
                                  RecomputeRecipe recipe) {
    LazyStash s;
    s.tag_ = std::move(tag);
    s.role_ = role;
    s.recipe_ = std::move(recipe);
    return s;
}

const Tensor& LazyStash::stored() const {
    if (!value_) {
        throw StateError("stash '" + tag_ + "' is recomputable, not stored");
    }
    return *value_;
}

const RecomputeRecipe& LazyStash::recipe() const {
    if (!recipe_) {
        throw StateError("stash '" + tag_ + "' is materialized, has no recipe");
    }
    return *recipe_;
}

Tensor materialize(const LazyStash& stash) {
    if (stash.is_materialized()) return stash.stored();
    return run_recompute_rule(stash.recipe());
}

bool GradientMap::has(NodeId id) const {
    return id >= 0 && id < static_cast<NodeId>(grads_.size()) &&
           grads_[id].defined();
}

const Tensor& GradientMap::at(NodeId id) const {
    if (!has(id)) {
        throw StateError("no gradient recorded for node " + std::to_string(id));
    }
    return grads_[id];
}

NodeId Tape::leaf(Tensor value, std::string tag) {
    return record("leaf", std::move(tag), {}, std::move(value), {}, nullptr);
}

NodeId Tape::record(std::string op, std::string tag, std::vector<NodeId> inputs,
                    Tensor value, std::vector<LazyStash> stashes,
                    BackwardFn backward) {
    if (backward_done_) {
        throw StateError("record on a tape whose backward already ran");
    }
    if (!value.defined()) {
        throw ParamError("record of op '" + op + "' without a value");
    }
    for (NodeId in : inputs) check_node_id(in);

    TapeNode node;
    node.op = std::move(op);
    node.tag = std::move(tag);
    node.inputs = std::move(inputs);
    node.value = std::move(value);
    node.backward = std::move(backward);
    node.stashes = std::move(stashes);
    if (ledger_) {
        for (const LazyStash& s : node.stashes) {
            if (s.is_materialized() && s.charged()) {
                ledger_->record(s.tag(), s.role(), s.stored());
                node.charged.push_back(s.stored().ident());
            }
        }
    }
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::charge(NodeId id, const std::string& tag, StashRole role,
                  const BoolMask& m) {
    if (!ledger_) return;
    ledger_->record(tag, role, m);
    node_mut(id).charged.push_back(m.ident());
}

void Tape::charge(NodeId id, const std::string& tag, StashRole role,
                  const Tensor& t) {
    if (!ledger_) return;
    ledger_->record(tag, role, t);
    node_mut(id).charged.push_back(t.ident());
}

void Tape::set_output_recipe(NodeId id, RecomputeRecipe recipe) {
    node_mut(id).output_recipe = std::move(recipe);
}

const TapeNode& Tape::node(NodeId id) const {
    check_node_id(id);
    return nodes_[id];
}

const Tensor& Tape::value(NodeId id) const {
    return node(id).value;
}

TapeNode& Tape::node_mut(NodeId id) {
    check_node_id(id);
    return nodes_[id];
}

void Tape::check_node_id(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
        throw ParamError("node id " + std::to_string(id) + " out of range");
    }
}

GradientMap Tape::backward(NodeId root, Tensor seed) {
    check_node_id(root);
    if (backward_done_) {
        throw StateError("backward already ran on this tape");
    }
    if (!seed.defined()) {
        throw ParamError("backward needs a seed gradient");
    }
    if (!shape_eq(seed.shape(), nodes_[root].value.shape())) {
        throw DimensionError("seed shape " + shape_str(seed.shape()) +
                             " does not match root value shape " +
                             shape_str(nodes_[root].value.shape()));
    }
    backward_done_ = true;

    std::vector<Tensor> grads(nodes_.size());
    grads[root] = std::move(seed);
    for (NodeId i = root; i >= 0; --i) {
        if (!grads[i].defined()) continue;
        TapeNode& nd = nodes_[i];
        if (nd.inputs.empty() && !nd.backward) continue;  // leaf: keep grad
        if (!nd.backward) {
            throw ConfigError("no backward rule recorded for op '" + nd.op +
                              "'");
        }
        BackwardCtx ctx(this, i, grads[i]);
        std::vector<Tensor> gin = nd.backward(ctx);
        if (gin.size() != nd.inputs.size()) {
            throw InvariantError("op '" + nd.op + "' returned " +
                                 std::to_string(gin.size()) +
                                 " gradients for " +
                                 std::to_string(nd.inputs.size()) + " inputs");
        }
        for (std::size_t j = 0; j < gin.size(); ++j) {
            if (!gin[j].defined()) continue;
            NodeId in = nd.inputs[j];
            const Tensor& iv = nodes_[in].value;
            if (!shape_eq(gin[j].shape(), iv.shape())) {
                throw InvariantError(
                    "op '" + nd.op + "' gradient " + std::to_string(j) +
                    " has shape " + shape_str(gin[j].shape()) +
                    ", input has " + shape_str(iv.shape()));
            }
            grads[in] = grads[in].defined() ? tempo::add(grads[in], gin[j])
                                            : gin[j];
        }
        ctx.release_temps();
        if (ledger_) {
            for (const void* ident : nd.charged) ledger_->release(ident);
        }
        nd.charged.clear();
        // The upstream gradient for this node is no longer needed.
        if (i != root) grads[i] = Tensor();
    }
    return GradientMap(std::move(grads));
}

BackwardCtx::BackwardCtx(Tape* tape, NodeId id, const Tensor& grad_out)
    : tape_(tape), id_(id), grad_out_(grad_out) {
    cache_.resize(tape_->nodes_[id_].stashes.size());
}

const Tensor& BackwardCtx::stash(std::size_t i) {
    const TapeNode& nd = tape_->nodes_[id_];
    if (i >= nd.stashes.size()) {
        throw ParamError("stash index " + std::to_string(i) +
                         " out of range for op '" + nd.op + "'");
    }
    if (cache_[i].defined()) return cache_[i];
    const LazyStash& s = nd.stashes[i];
    if (s.is_materialized()) {
        cache_[i] = s.stored();
    } else {
        Tensor t = run_recompute_rule(s.recipe());
        if (tape_->ledger_) {
            tape_->ledger_->record(s.tag() + "#recomputed",
                                   StashRole::OpOwnStash, t);
            temp_idents_.push_back(t.ident());
        }
        cache_[i] = std::move(t);
    }
    return cache_[i];
}

const Tensor& BackwardCtx::input_value(std::size_t i) const {
    const TapeNode& nd = tape_->nodes_[id_];
    if (i >= nd.inputs.size()) {
        throw ParamError("input index " + std::to_string(i) +
                         " out of range for op '" + nd.op + "'");
    }
    return tape_->nodes_[nd.inputs[i]].value;
}

const Tensor& BackwardCtx::node_value() const {
    return tape_->nodes_[id_].value;
}

void BackwardCtx::release_temps() {
    if (tape_->ledger_) {
        for (const void* ident : temp_idents_) tape_->ledger_->release(ident);
    }
    temp_idents_.clear();
    // Recomputed tensors die with the cache.
    cache_.clear();
}

}  // namespace tempo
