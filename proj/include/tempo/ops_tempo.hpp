// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Memory-optimized operators.
//
// The elementwise ops differentiate from their own output plus a one-byte
// branch mask instead of keeping the input. LayerNorm reconstructs the
// normalized input from its output and keeps only a per-row reciprocal
// standard deviation. Softmax keeps only its output. Attention dropout
// keeps only its mask and hands consumers a recipe that rebuilds the
// dropped-out map during backward.

#pragma once

#include "tempo/gelu_table.hpp"
#include "tempo/graph.hpp"

namespace tempo {
namespace tempo_ops {

// An invertible-by-branch elementwise op: the forward value plus a branch
// bit determine the derivative. grad_from_output(y, m) returns f'(x) for
// the x on branch m with f(x) = y.
struct InplaceElementwiseSpec {
    std::string name;
    std::function<double(double)> fwd;
    std::function<int(double)> branch;
    std::function<double(double, int)> grad_from_output;
};

// Builds a node that stashes its own output (shared with any downstream
// consumer) and a one-byte mask; the input is not retained.
NodeId inplace_elementwise(Graph& g, NodeId x,
                           const InplaceElementwiseSpec& spec, std::string tag,
                           std::string mask_tag);

// GELU as an inplace-elementwise instance. The table is captured by
// reference and must outlive the graph; backward refuses to run until the
// table has been sweep-verified.
InplaceElementwiseSpec gelu_spec(const GeluPolyTable& table);
NodeId gelu(Graph& g, NodeId x, const GeluPolyTable* table, std::string tag,
            std::string mask_tag);

// Rejects any |gamma| < gamma_min at construction: backward divides by
// gamma to reconstruct the normalized input from the output.
inline constexpr double kLayerNormGammaMin = 1e-12;
NodeId layernorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double epsilon,
                 std::string tag, std::string rstd_tag);

NodeId softmax(Graph& g, NodeId z, std::string tag);

// Requires the input tensor to be ledger-live (some op must have stashed
// it); otherwise the recompute recipe would have nothing cheap to read.
NodeId dropout_recompute(Graph& g, NodeId x, double p, BoolMask mask,
                         std::string tag, std::string mask_tag);

// Attention with output-only softmax and recomputed dropout: per map
// element only the softmax output (4 B) and the mask (1 B) stay alive.
NodeId sdpa(Graph& g, NodeId q, NodeId k, NodeId v, double p, BoolMask mask,
            const std::string& prefix = "attn_");

// Registers the recompute rules this module contributes (idempotent).
void ensure_recompute_rules();

}  // namespace tempo_ops
}  // namespace tempo
