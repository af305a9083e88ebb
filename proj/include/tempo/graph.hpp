// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// A Graph bundles a tape with the ledger it charges and offers the generic
// node builders (structural ops, linear algebra, loss). Operator-specific
// builders live in ops_reference.hpp / ops_tempo.hpp.
//
// Stashing convention: a node that needs an input tensor for its backward
// stashes that input under the producing node's tag. If the producer carries
// an output recipe, the stash is recorded as recomputable and costs nothing
// until backward materializes it.

#pragma once

#include "tempo/ledger.hpp"
#include "tempo/tape.hpp"

namespace tempo {

struct Graph {
    StashLedger ledger;
    Tape tape{&ledger};

    NodeId leaf(Tensor value, std::string tag);
    // Parameters are leaves; the name marks intent at call sites.
    NodeId param(Tensor value, std::string tag) {
        return leaf(std::move(value), std::move(tag));
    }

    const Tensor& value(NodeId id) const { return tape.value(id); }

    // Stash helper honoring the producer's output recipe.
    LazyStash input_stash(NodeId in, StashRole role) const;

    // [.., m, k] x [.., k, n]; stashes both inputs.
    NodeId matmul(NodeId a, NodeId b, std::string tag = "");
    // [.., m, k] x [.., n, k]; stashes both inputs.
    NodeId matmul_nt(NodeId a, NodeId b, std::string tag = "");
    // No stash; backward is g * c.
    NodeId scale(NodeId a, double c, std::string tag = "");
    // No stash; gradient passes through to both inputs.
    NodeId add(NodeId a, NodeId b, std::string tag = "");
    // Pure permutations; no stash.
    NodeId split_heads(NodeId x, std::int64_t heads, std::string tag = "");
    NodeId merge_heads(NodeId x, std::string tag = "");
    // y = x W + b with W [in, out], bias [out]; stashes x only.
    NodeId linear(NodeId x, NodeId w, NodeId b, std::string tag = "");
    // Mean squared error against a constant target; scalar output. The loss
    // probe is measurement harness, so it charges nothing to the ledger.
    NodeId mse_loss(NodeId pred, Tensor target, std::string tag = "");

    // backward() seeded with 1 for a scalar-valued root.
    GradientMap backward_scalar(NodeId root);
};

}  // namespace tempo
