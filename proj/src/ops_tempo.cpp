// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/ops_tempo.hpp"

#include <cmath>

#include "tempo/kernels.hpp"
#include "tempo/math.hpp"
#include "tempo/ops_reference.hpp"

namespace tempo {
namespace tempo_ops {

void ensure_recompute_rules() {
    static const bool done = [] {
        register_recompute_rule(
            "dropout-rescale", [](const RecomputeRecipe& recipe) {
                std::vector<Tensor> src = recipe.lock_sources();
                if (src.size() != 1 || recipe.masks.size() != 1) {
                    throw ConfigError(
                        "dropout-rescale recipe needs one source, one mask");
                }
                double p = recipe.scalars.at("p");
                return dropout_apply(src[0], recipe.masks[0], p);
            });
        return true;
    }();
    (void)done;
}

NodeId inplace_elementwise(Graph& g, NodeId x,
                           const InplaceElementwiseSpec& spec, std::string tag,
                           std::string mask_tag) {
    if (!spec.fwd || !spec.branch || !spec.grad_from_output) {
        throw ConfigError("inplace elementwise spec '" + spec.name +
                          "' is missing a callback");
    }
    const Tensor& vx = g.value(x);
    Tensor y = Tensor::zeros(vx.shape(), vx.dtype());
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(vx.numel()));
    for (std::int64_t i = 0; i < vx.numel(); ++i) {
        double xv = vx.get(i);
        y.set(i, spec.fwd(xv));
        int b = spec.branch(xv);
        if (b != 0 && b != 1) {
            throw InvariantError("branch classifier for '" + spec.name +
                                 "' returned " + std::to_string(b));
        }
        bits[i] = static_cast<std::uint8_t>(b);
    }
    BoolMask mask = BoolMask::from_bytes(vx.shape(), std::move(bits));

    auto grad_from_output = spec.grad_from_output;
    std::string op_name = spec.name + "_ip";
    NodeId id = g.tape.record(
        op_name, tag, {x}, y,
        {LazyStash::materialized(tag, StashRole::OpOwnStash, y)},
        [grad_from_output, mask](BackwardCtx& ctx) -> std::vector<Tensor> {
            const Tensor& g_out = ctx.grad_out();
            const Tensor& y_val = ctx.stash(0);
            Tensor dx = Tensor::zeros(y_val.shape(), y_val.dtype());
            for (std::int64_t i = 0; i < y_val.numel(); ++i) {
                dx.set(i, g_out.get(i) *
                              grad_from_output(y_val.get(i), mask.get(i)));
            }
            return {dx};
        });
    g.tape.charge(id, mask_tag, StashRole::OpOwnStash, mask);
    return id;
}

InplaceElementwiseSpec gelu_spec(const GeluPolyTable& table) {
    InplaceElementwiseSpec spec;
    spec.name = "gelu";
    spec.fwd = [](double x) { return tempo::gelu(x); };
    double x_star = table.minimum().x_star;
    spec.branch = [x_star](double x) { return x > x_star ? 1 : 0; };
    spec.grad_from_output = [&table](double y, int m) {
        if (!table.verified()) {
            throw ConfigError(
                "gelu backward requires a sweep-verified table");
        }
        return table.eval(y, static_cast<std::uint8_t>(m));
    };
    return spec;
}

NodeId gelu(Graph& g, NodeId x, const GeluPolyTable* table, std::string tag,
            std::string mask_tag) {
    if (table == nullptr || table->empty()) {
        throw ConfigError("in-place gelu needs a fitted table");
    }
    return inplace_elementwise(g, x, gelu_spec(*table), std::move(tag),
                               std::move(mask_tag));
}

NodeId layernorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double epsilon,
                 std::string tag, std::string rstd_tag) {
    const Tensor& vg = g.value(gamma);
    for (std::int64_t j = 0; j < vg.numel(); ++j) {
        if (std::abs(vg.get(j)) < kLayerNormGammaMin) {
            throw ParamError("layernorm gamma[" + std::to_string(j) +
                             "] too close to zero to invert the output");
        }
    }
    LayerNormResult r = layernorm_forward(g.value(x), vg, g.value(beta),
                                          epsilon);
    std::int64_t rows = r.mean.numel();
    Tensor rstd = Tensor::zeros(r.mean.shape(), g.value(x).dtype());
    for (std::int64_t i = 0; i < rows; ++i) {
        rstd.set(i, 1.0 / std::sqrt(r.var.get(i) + epsilon));
    }
    // The mean and variance die here; backward works from y and rstd alone.
    std::vector<LazyStash> stashes;
    stashes.push_back(LazyStash::materialized(tag, StashRole::OpOwnStash, r.y));
    stashes.push_back(
        LazyStash::materialized(rstd_tag, StashRole::Statistic, rstd));
    return g.tape.record(
        "layernorm_ip", tag, {x, gamma, beta}, r.y, std::move(stashes),
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            const Tensor& g_out = ctx.grad_out();
            const Tensor& y = ctx.stash(0);
            const Tensor& rstd_v = ctx.stash(1);
            const Tensor& gamma_v = ctx.input_value(1);
            const Tensor& beta_v = ctx.input_value(2);
            std::int64_t m = y.shape().back();
            std::int64_t n_rows = y.numel() / m;
            Tensor dx = Tensor::zeros(y.shape(), y.dtype());
            Tensor dgamma = Tensor::zeros({m}, y.dtype());
            Tensor dbeta = Tensor::zeros({m}, y.dtype());
            for (std::int64_t i = 0; i < n_rows; ++i) {
                double rs = rstd_v.get(i);
                double s1 = 0.0;
                double s2 = 0.0;
                for (std::int64_t j = 0; j < m; ++j) {
                    double gg = g_out.get(i * m + j) * gamma_v.get(j);
                    double xh = (y.get(i * m + j) - beta_v.get(j)) /
                                gamma_v.get(j);
                    s1 += gg;
                    s2 += gg * xh;
                }
                for (std::int64_t j = 0; j < m; ++j) {
                    double gv = g_out.get(i * m + j);
                    double gg = gv * gamma_v.get(j);
                    double xh = (y.get(i * m + j) - beta_v.get(j)) /
                                gamma_v.get(j);
                    dx.set(i * m + j,
                           (gg - s1 / double(m) - xh * s2 / double(m)) * rs);
                    dgamma.set(j, dgamma.get(j) + gv * xh);
                    dbeta.set(j, dbeta.get(j) + gv);
                }
            }
            return {std::move(dx), std::move(dgamma), std::move(dbeta)};
        });
}

NodeId softmax(Graph& g, NodeId z, std::string tag) {
    Tensor y = softmax_forward(g.value(z));
    return g.tape.record(
        "softmax_ip", tag, {z}, y,
        {LazyStash::materialized(tag, StashRole::OpOwnStash, y)},
        [](BackwardCtx& ctx) -> std::vector<Tensor> {
            return {softmax_backward_from_output(ctx.grad_out(), ctx.stash(0))};
        });
}

NodeId dropout_recompute(Graph& g, NodeId x, double p, BoolMask mask,
                         std::string tag, std::string mask_tag) {
    ensure_recompute_rules();
    const Tensor& vx = g.value(x);
    if (!g.ledger.is_live(vx.ident())) {
        throw ConfigError(
            "dropout_recompute requires its input to be retained upstream");
    }
    Tensor y = dropout_apply(vx, mask, p);

    RecomputeRecipe recipe;
    recipe.rule = "dropout-rescale";
    recipe.sources = {vx.weak_storage()};
    recipe.masks = {mask};
    recipe.scalars["p"] = p;
    recipe.result_shape = y.shape();
    recipe.result_dtype = y.dtype();

    NodeId id = g.tape.record(
        "dropout_recompute", std::move(tag), {x}, std::move(y), {},
        [mask, p](BackwardCtx& ctx) -> std::vector<Tensor> {
            return {dropout_backward(ctx.grad_out(), mask, p)};
        });
    g.tape.charge(id, mask_tag, StashRole::OpOwnStash, mask);
    g.tape.set_output_recipe(id, std::move(recipe));
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
    NodeId drop = dropout_recompute(g, probs, p, std::move(mask),
                                    prefix + "drop_out", prefix + "drop_mask");
    return g.matmul(drop, v, prefix + "context_heads");
}

}  // namespace tempo_ops
}  // namespace tempo
