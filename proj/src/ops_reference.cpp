// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/ops_reference.hpp"

#include <cmath>

#include "tempo/kernels.hpp"
#include "tempo/math.hpp"

namespace tempo {

Tensor gelu_forward(const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape(), x.dtype());
    for (std::int64_t i = 0; i < x.numel(); ++i) y.set(i, gelu(x.get(i)));
    return y;
}

Tensor gelu_backward_from_input(const Tensor& g, const Tensor& x) {
    if (!shape_eq(g.shape(), x.shape())) {
        throw DimensionError("gelu backward shapes " + shape_str(g.shape()) +
                             " and " + shape_str(x.shape()) + " differ");
    }
    Tensor dx = Tensor::zeros(x.shape(), x.dtype());
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        dx.set(i, g.get(i) * gelu_prime(x.get(i)));
    }
    return dx;
}

namespace {

void check_affine_params(const Tensor& x, const Tensor& gamma,
                         const Tensor& beta, const char* op) {
    std::int64_t m = x.shape().empty() ? 0 : x.shape().back();
    if (gamma.shape().size() != 1 || gamma.shape()[0] != m ||
        beta.shape().size() != 1 || beta.shape()[0] != m) {
        throw DimensionError(std::string(op) + " affine params " +
                             shape_str(gamma.shape()) + ", " +
                             shape_str(beta.shape()) + " do not match " +
                             shape_str(x.shape()));
    }
}

}  // namespace

LayerNormResult layernorm_forward(const Tensor& x, const Tensor& gamma,
                                  const Tensor& beta, double epsilon) {
    check_affine_params(x, gamma, beta, "layernorm");
    if (epsilon <= 0.0) {
        throw ParamError("layernorm epsilon must be positive");
    }
    RowMoments mom = row_moments(x);
    std::int64_t m = x.shape().back();
    std::int64_t rows = x.numel() / m;
    Tensor y = Tensor::zeros(x.shape(), x.dtype());
    for (std::int64_t i = 0; i < rows; ++i) {
        double rstd = 1.0 / std::sqrt(mom.var.get(i) + epsilon);
        for (std::int64_t j = 0; j < m; ++j) {
            double xh = (x.get(i * m + j) - mom.mean.get(i)) * rstd;
            y.set(i * m + j, gamma.get(j) * xh + beta.get(j));
        }
    }
    return {std::move(y), std::move(mom.mean), std::move(mom.var)};
}

LayerNormGrads layernorm_backward_from_input(const Tensor& g, const Tensor& x,
                                             const Tensor& mean,
                                             const Tensor& var,
                                             const Tensor& gamma,
                                             double epsilon) {
    if (!shape_eq(g.shape(), x.shape())) {
        throw DimensionError("layernorm backward shapes " +
                             shape_str(g.shape()) + " and " +
                             shape_str(x.shape()) + " differ");
    }
    std::int64_t m = x.shape().back();
    std::int64_t rows = x.numel() / m;
    LayerNormGrads out{Tensor::zeros(x.shape(), x.dtype()),
                       Tensor::zeros({m}, x.dtype()),
                       Tensor::zeros({m}, x.dtype())};
    for (std::int64_t i = 0; i < rows; ++i) {
        double rstd = 1.0 / std::sqrt(var.get(i) + epsilon);
        double s1 = 0.0;  // sum_j g*gamma
        double s2 = 0.0;  // sum_j g*gamma*xhat
        for (std::int64_t j = 0; j < m; ++j) {
            double gg = g.get(i * m + j) * gamma.get(j);
            double xh = (x.get(i * m + j) - mean.get(i)) * rstd;
            s1 += gg;
            s2 += gg * xh;
        }
        for (std::int64_t j = 0; j < m; ++j) {
            double gg = g.get(i * m + j) * gamma.get(j);
            double xh = (x.get(i * m + j) - mean.get(i)) * rstd;
            out.dx.set(i * m + j,
                       (gg - s1 / double(m) - xh * s2 / double(m)) * rstd);
            out.dgamma.set(j, out.dgamma.get(j) + g.get(i * m + j) * xh);
            out.dbeta.set(j, out.dbeta.get(j) + g.get(i * m + j));
        }
    }
    return out;
}

Tensor softmax_forward(const Tensor& z) {
    if (z.shape().empty()) {
        throw DimensionError("softmax needs rank >= 1");
    }
    std::int64_t m = z.shape().back();
    std::int64_t rows = z.numel() / m;
    Tensor y = Tensor::zeros(z.shape(), z.dtype());
    for (std::int64_t i = 0; i < rows; ++i) {
        double hi = z.get(i * m);
        for (std::int64_t j = 1; j < m; ++j) hi = std::max(hi, z.get(i * m + j));
        double denom = 0.0;
        for (std::int64_t j = 0; j < m; ++j) {
            double e = std::exp(z.get(i * m + j) - hi);
            y.set(i * m + j, e);
            denom += e;
        }
        for (std::int64_t j = 0; j < m; ++j) {
            y.set(i * m + j, y.get(i * m + j) / denom);
        }
    }
    return y;
}

Tensor softmax_backward_from_output(const Tensor& g, const Tensor& y) {
    if (!shape_eq(g.shape(), y.shape())) {
        throw DimensionError("softmax backward shapes " + shape_str(g.shape()) +
                             " and " + shape_str(y.shape()) + " differ");
    }
    std::int64_t m = y.shape().back();
    std::int64_t rows = y.numel() / m;
    Tensor dz = Tensor::zeros(y.shape(), y.dtype());
    for (std::int64_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < m; ++j) {
            s += g.get(i * m + j) * y.get(i * m + j);
        }
        for (std::int64_t j = 0; j < m; ++j) {
            dz.set(i * m + j, y.get(i * m + j) * (g.get(i * m + j) - s));
        }
    }
    return dz;
}

Tensor dropout_apply(const Tensor& x, const BoolMask& mask, double p) {
    if (!(p >= 0.0) || p >= 1.0) {
        throw ParamError("dropout p must lie in [0, 1), got " +
                         std::to_string(p));
    }
    return mask_scale(x, mask, 1.0 / (1.0 - p));
}

Tensor dropout_backward(const Tensor& g, const BoolMask& mask, double p) {
    if (!(p >= 0.0) || p >= 1.0) {
        throw ParamError("dropout p must lie in [0, 1), got " +
                         std::to_string(p));
    }
    return mask_scale(g, mask, 1.0 / (1.0 - p));
}

namespace ref_ops {

NodeId gelu(Graph& g, NodeId x, std::string tag) {
    Tensor y = gelu_forward(g.value(x));
    return g.tape.record(
        "gelu_ref", std::move(tag), {x}, std::move(y),
        {g.input_stash(x, StashRole::SharedDownstream)},
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            return {gelu_backward_from_input(ctx.grad_out(), ctx.stash(0))};
        });
}

NodeId layernorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double epsilon,
                 std::string tag) {
    LayerNormResult r = layernorm_forward(g.value(x), g.value(gamma),
                                          g.value(beta), epsilon);
    // Row moments ride along unweighed: the baseline accounting tracks
    // feature-sized activations, not per-row scalars.
    std::vector<LazyStash> stashes;
    stashes.push_back(g.input_stash(x, StashRole::SharedDownstream));
    stashes.push_back(LazyStash::materialized(tag + "_mean", StashRole::Statistic,
                                              r.mean, /*charged=*/false));
    stashes.push_back(LazyStash::materialized(tag + "_var", StashRole::Statistic,
                                              r.var, /*charged=*/false));
    return g.tape.record(
        "layernorm_ref", std::move(tag), {x, gamma, beta}, std::move(r.y),
        std::move(stashes),
        [epsilon](BackwardCtx& ctx) -> std::vector<Tensor> {
            LayerNormGrads grads = layernorm_backward_from_input(
                ctx.grad_out(), ctx.stash(0), ctx.stash(1), ctx.stash(2),
                ctx.input_value(1), epsilon);
            return {std::move(grads.dx), std::move(grads.dgamma),
                    std::move(grads.dbeta)};
        });
}

NodeId softmax(Graph& g, NodeId z, std::string tag) {
    Tensor y = softmax_forward(g.value(z));
    // Keeps input and output alive, as a stock framework would; backward
    // only reads the output.
    std::vector<LazyStash> stashes;
    stashes.push_back(g.input_stash(z, StashRole::SharedDownstream));
    stashes.push_back(
        LazyStash::materialized(tag, StashRole::OpOwnStash, y));
    return g.tape.record(
        "softmax_ref", std::move(tag), {z}, y, std::move(stashes),
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            return {softmax_backward_from_output(ctx.grad_out(), ctx.stash(1))};
        });
}

NodeId dropout(Graph& g, NodeId x, double p, BoolMask mask, std::string tag,
               std::string mask_tag) {
    const Tensor& vx = g.value(x);
    Tensor y = dropout_apply(vx, mask, p);
    NodeId id = g.tape.record(
        "dropout_ref", std::move(tag), {x}, std::move(y), {},
        [mask, p](BackwardCtx& ctx) -> std::vector<Tensor> {
            return {dropout_backward(ctx.grad_out(), mask, p)};
        });
    g.tape.charge(id, mask_tag, StashRole::OpOwnStash, mask);
    return id;
}

NodeId sdpa(Graph& g, NodeId q, NodeId k, NodeId v, double p, BoolMask mask,
            const std::string& prefix) {
    const Shape& qs = g.value(q).shape();
    if (qs.size() != 4) {
        throw DimensionError("sdpa expects [B,A,S,d] inputs, got " +
                             shape_str(qs));
    }
    std::int64_t d = qs.back();
    NodeId raw = g.matmul_nt(q, k, prefix + "scores_raw");
    NodeId scores = g.scale(raw, 1.0 / std::sqrt(double(d)), prefix + "scores");
    NodeId probs = softmax(g, scores, prefix + "probs");
    NodeId drop = dropout(g, probs, p, std::move(mask), prefix + "drop_out",
                          prefix + "drop_mask");
    return g.matmul(drop, v, prefix + "context_heads");
}

}  // namespace ref_ops
}  // namespace tempo
