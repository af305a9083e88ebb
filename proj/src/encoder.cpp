// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/encoder.hpp"

#include <cmath>

#include "tempo/ops_reference.hpp"
#include "tempo/ops_tempo.hpp"

namespace tempo {
namespace encoder {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Reference: return "reference";
        case Variant::Tempo: return "tempo";
        case Variant::Mixed: return "mixed";
    }
    return "unknown";
}

Variant variant_from_name(const std::string& name) {
    if (name == "reference") return Variant::Reference;
    if (name == "tempo") return Variant::Tempo;
    if (name == "mixed") return Variant::Mixed;
    throw ParamError("unknown variant '" + name + "'");
}

OpToggles resolve_toggles(Variant v, const OpToggles& mixed) {
    switch (v) {
        case Variant::Reference: return OpToggles{};
        case Variant::Tempo: return OpToggles{true, true, true, true};
        case Variant::Mixed: return mixed;
    }
    throw ParamError("unknown variant");
}

std::uint64_t mask_stream_seed(std::uint64_t mask_seed, std::uint64_t salt,
                               int site) {
    // splitmix64 over a site-salted input.
    std::uint64_t z = mask_seed + 0x9E3779B97F4A7C15ull * (salt * 3 + site + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed,
                                  Dtype dt) {
    cfg.validate();
    std::int64_t H = cfg.hidden;
    double s_h = 1.0 / std::sqrt(double(H));
    double s_4h = 1.0 / std::sqrt(double(4 * H));
    EncoderParams p;
    p.wq = Tensor::randn({H, H}, seed + 1, dt, s_h);
    p.wk = Tensor::randn({H, H}, seed + 2, dt, s_h);
    p.wv = Tensor::randn({H, H}, seed + 3, dt, s_h);
    p.wo = Tensor::randn({H, H}, seed + 4, dt, s_h);
    p.w1 = Tensor::randn({H, 4 * H}, seed + 5, dt, s_h);
    p.w2 = Tensor::randn({4 * H, H}, seed + 6, dt, s_4h);
    p.bq = Tensor::zeros({H}, dt);
    p.bk = Tensor::zeros({H}, dt);
    p.bv = Tensor::zeros({H}, dt);
    p.bo = Tensor::zeros({H}, dt);
    p.b1 = Tensor::zeros({4 * H}, dt);
    p.b2 = Tensor::zeros({H}, dt);
    p.gamma1 = Tensor::full({H}, 1.0, dt);
    p.beta1 = Tensor::zeros({H}, dt);
    p.gamma2 = Tensor::full({H}, 1.0, dt);
    p.beta2 = Tensor::zeros({H}, dt);
    return p;
}

std::vector<std::pair<std::string, Tensor*>> EncoderParams::named() {
    return {{"wq", &wq},         {"bq", &bq},     {"wk", &wk},
            {"bk", &bk},         {"wv", &wv},     {"bv", &bv},
            {"wo", &wo},         {"bo", &bo},     {"w1", &w1},
            {"b1", &b1},         {"w2", &w2},     {"b2", &b2},
            {"gamma1", &gamma1}, {"beta1", &beta1},
            {"gamma2", &gamma2}, {"beta2", &beta2}};
}

std::vector<std::pair<std::string, const Tensor*>> EncoderParams::named()
    const {
    auto mut = const_cast<EncoderParams*>(this)->named();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) out.emplace_back(name, t);
    return out;
}

EncoderParams EncoderParams::clone() const {
    EncoderParams c;
    auto src = named();
    auto dst = c.named();
    for (std::size_t i = 0; i < src.size(); ++i) {
        *dst[i].second = src[i].second->clone();
    }
    return c;
}

namespace {

void validate_spec(const LayerSpec& spec) {
    spec.cfg.validate();
    OpToggles t = resolve_toggles(spec.variant, spec.mixed);
    if (t.inplace_gelu &&
        (spec.gelu_table == nullptr || spec.gelu_table->empty())) {
        throw ConfigError("in-place gelu needs a fitted table in the spec");
    }
}

}  // namespace

ForwardNodes build_layer_forward(Graph& g, const LayerSpec& spec,
                                 const EncoderParams& params, NodeId x,
                                 std::uint64_t mask_seed,
                                 const std::string& prefix,
                                 std::uint64_t mask_salt) {
    validate_spec(spec);
    const EncoderConfig& cfg = spec.cfg;
    OpToggles tog = resolve_toggles(spec.variant, spec.mixed);
    std::int64_t B = cfg.batch, S = cfg.seq, H = cfg.hidden, A = cfg.heads;
    double p = cfg.dropout_p;
    namespace an = memory_model::activation;
    auto pfx = [&prefix](const std::string& name) { return prefix + name; };

    const Shape& xs = g.value(x).shape();
    if (!shape_eq(xs, {B, S, H})) {
        throw DimensionError("encoder input shape " + shape_str(xs) +
                             " does not match config " +
                             shape_str({B, S, H}));
    }

    ForwardNodes out;
    out.input = x;

    auto reg = [&](const std::string& name, const Tensor& t) {
        NodeId id = g.param(t, pfx(name));
        out.params[pfx(name)] = id;
        return id;
    };
    NodeId wq = reg("wq", params.wq), bq = reg("bq", params.bq);
    NodeId wk = reg("wk", params.wk), bk = reg("bk", params.bk);
    NodeId wv = reg("wv", params.wv), bv = reg("bv", params.bv);
    NodeId wo = reg("wo", params.wo), bo = reg("bo", params.bo);
    NodeId w1 = reg("w1", params.w1), b1 = reg("b1", params.b1);
    NodeId w2 = reg("w2", params.w2), b2 = reg("b2", params.b2);
    NodeId gamma1 = reg("gamma1", params.gamma1);
    NodeId beta1 = reg("beta1", params.beta1);
    NodeId gamma2 = reg("gamma2", params.gamma2);
    NodeId beta2 = reg("beta2", params.beta2);

    // Attention.
    NodeId q_lin = g.linear(x, wq, bq, pfx("q_lin"));
    NodeId k_lin = g.linear(x, wk, bk, pfx("k_lin"));
    NodeId v_lin = g.linear(x, wv, bv, pfx("v_lin"));
    NodeId q = g.split_heads(q_lin, A, pfx(an::attn_q));
    NodeId k = g.split_heads(k_lin, A, pfx(an::attn_k));
    NodeId v = g.split_heads(v_lin, A, pfx(an::attn_v));

    NodeId raw = g.matmul_nt(q, k, pfx("attn_scores_raw"));
    NodeId scores = g.scale(raw, 1.0 / std::sqrt(double(cfg.head_dim())),
                            pfx(an::attn_scores));
    NodeId probs = tog.output_only_softmax
                       ? tempo_ops::softmax(g, scores, pfx(an::attn_probs))
                       : ref_ops::softmax(g, scores, pfx(an::attn_probs));
    BoolMask attn_mask = BoolMask::bernoulli_keep(
        {B, A, S, S}, p, mask_stream_seed(mask_seed, mask_salt, 0));
    NodeId drop =
        tog.recompute_dropout
            ? tempo_ops::dropout_recompute(g, probs, p, std::move(attn_mask),
                                           pfx(an::attn_drop_out),
                                           pfx(an::attn_drop_mask))
            : ref_ops::dropout(g, probs, p, std::move(attn_mask),
                               pfx(an::attn_drop_out), pfx(an::attn_drop_mask));
    NodeId ctx_heads = g.matmul(drop, v, pfx("attn_context_heads"));
    NodeId ctx = g.merge_heads(ctx_heads, pfx(an::attn_context));
    NodeId proj = g.linear(ctx, wo, bo, pfx("attn_proj"));
    BoolMask out_mask = BoolMask::bernoulli_keep(
        {B, S, H}, p, mask_stream_seed(mask_seed, mask_salt, 1));
    NodeId hdrop1 =
        ref_ops::dropout(g, proj, p, std::move(out_mask),
                         pfx("attn_out_drop"), pfx(an::attn_out_drop_mask));
    NodeId r1 = g.add(x, hdrop1, pfx(an::ln1_input));
    NodeId ln1 =
        tog.inplace_layernorm
            ? tempo_ops::layernorm(g, r1, gamma1, beta1, cfg.epsilon,
                                   pfx(an::ln1_output), pfx("ln1_rstd"))
            : ref_ops::layernorm(g, r1, gamma1, beta1, cfg.epsilon,
                                 pfx(an::ln1_output));

    // Feed-forward.
    NodeId ff1 = g.linear(ln1, w1, b1, pfx(an::ffn_pre_gelu));
    NodeId act = tog.inplace_gelu
                     ? tempo_ops::gelu(g, ff1, spec.gelu_table,
                                       pfx(an::gelu_output), pfx("gelu_mask"))
                     : ref_ops::gelu(g, ff1, pfx(an::gelu_output));
    NodeId ff2 = g.linear(act, w2, b2, pfx("ffn_out"));
    BoolMask ffn_mask = BoolMask::bernoulli_keep(
        {B, S, H}, p, mask_stream_seed(mask_seed, mask_salt, 2));
    NodeId hdrop2 = ref_ops::dropout(g, ff2, p, std::move(ffn_mask),
                                     pfx("ffn_drop"), pfx(an::ffn_drop_mask));
    NodeId r2 = g.add(ln1, hdrop2, pfx(an::ln2_input));
    NodeId ln2 =
        tog.inplace_layernorm
            ? tempo_ops::layernorm(g, r2, gamma2, beta2, cfg.epsilon,
                                   pfx("layer_output"), pfx("ln2_rstd"))
            : ref_ops::layernorm(g, r2, gamma2, beta2, cfg.epsilon,
                                 pfx("layer_output"));

    out.output = ln2;
    out.probes[pfx(an::attn_scores)] = scores;
    out.probes[pfx(an::attn_probs)] = probs;
    out.probes[pfx(an::attn_drop_out)] = drop;
    out.probes[pfx(an::attn_context)] = ctx;
    out.probes[pfx(an::ln1_input)] = r1;
    out.probes[pfx(an::ln1_output)] = ln1;
    out.probes[pfx(an::ffn_pre_gelu)] = ff1;
    out.probes[pfx(an::gelu_output)] = act;
    out.probes[pfx(an::ln2_input)] = r2;
    out.probes[pfx("layer_output")] = ln2;
    return out;
}

EncoderStack::EncoderStack(LayerSpec spec) : spec_(std::move(spec)) {
    validate_spec(spec_);
    for (std::int64_t l = 0; l < spec_.cfg.layers; ++l) {
        params_.push_back(EncoderParams::init(
            spec_.cfg, spec_.param_seed + 1000 * l, spec_.dtype));
    }
}

ForwardNodes EncoderStack::forward(Graph& g, const Tensor& x,
                                   std::uint64_t mask_seed) const {
    ForwardNodes all;
    NodeId cur = g.leaf(x, memory_model::activation::input);
    all.input = cur;
    for (std::int64_t l = 0; l < spec_.cfg.layers; ++l) {
        std::string prefix =
            spec_.cfg.layers > 1 ? "l" + std::to_string(l) + "_" : "";
        ForwardNodes fn = build_layer_forward(g, spec_, params_[l], cur,
                                              mask_seed, prefix, l);
        cur = fn.output;
        all.probes.insert(fn.probes.begin(), fn.probes.end());
        all.params.insert(fn.params.begin(), fn.params.end());
    }
    all.output = cur;
    return all;
}

}  // namespace encoder
}  // namespace tempo
