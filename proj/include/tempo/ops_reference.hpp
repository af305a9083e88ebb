// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Baseline operators. Each one stashes what a stock framework would keep:
// GELU its input, LayerNorm its input plus the row moments, softmax both its
// input and its output, dropout its mask while consumers stash its output.
// The forward math here is shared with the memory-optimized variants so the
// two op sets produce bitwise-identical forward values.

#pragma once

#include "tempo/graph.hpp"

namespace tempo {

// ---- pure tensor math (no tape) ----

Tensor gelu_forward(const Tensor& x);
// dx = g * gelu'(x), gelu'(x) = Phi(x) + x phi(x).
Tensor gelu_backward_from_input(const Tensor& g, const Tensor& x);

struct LayerNormResult {
    Tensor y;
    Tensor mean;  // per row
    Tensor var;   // per row, population
};
// Normalizes the last dimension: y = gamma * (x - mean) / sqrt(var + eps) + beta.
LayerNormResult layernorm_forward(const Tensor& x, const Tensor& gamma,
                                  const Tensor& beta, double epsilon);

struct LayerNormGrads {
    Tensor dx, dgamma, dbeta;
};
LayerNormGrads layernorm_backward_from_input(const Tensor& g, const Tensor& x,
                                             const Tensor& mean,
                                             const Tensor& var,
                                             const Tensor& gamma,
                                             double epsilon);

// Row-wise softmax over the last dimension, max-shifted for stability.
Tensor softmax_forward(const Tensor& z);
// dz = y * (g - sum(g * y)) needs only the output.
Tensor softmax_backward_from_output(const Tensor& g, const Tensor& y);

// y = x * mask / (1 - p).
Tensor dropout_apply(const Tensor& x, const BoolMask& mask, double p);
Tensor dropout_backward(const Tensor& g, const BoolMask& mask, double p);

namespace ref_ops {

NodeId gelu(Graph& g, NodeId x, std::string tag);

// gamma and beta are parameter nodes of shape [last dim of x].
NodeId layernorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double epsilon,
                 std::string tag);

NodeId softmax(Graph& g, NodeId z, std::string tag);

// The mask is charged as the op's own stash; the output is charged only by
// whichever consumer stashes it.
NodeId dropout(Graph& g, NodeId x, double p, BoolMask mask, std::string tag,
               std::string mask_tag);

// Scaled dot-product attention over [B, A, S, d] inputs:
// softmax(q k^T / sqrt(d)) -> dropout -> (.) v. Keeps all three [B, A, S, S]
// maps plus the mask alive for backward. Tags follow `prefix`.
NodeId sdpa(Graph& g, NodeId q, NodeId k, NodeId v, double p, BoolMask mask,
            const std::string& prefix = "attn_");

}  // namespace ref_ops
}  // namespace tempo
