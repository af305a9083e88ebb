// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/memory_model.hpp"

#include <map>

namespace tempo {
namespace memory_model {

void EncoderConfig::validate() const {
    if (batch <= 0 || seq <= 0 || hidden <= 0 || heads <= 0 || layers <= 0) {
        throw ParamError("encoder dimensions must be positive");
    }
    if (hidden % heads != 0) {
        throw ParamError("hidden size " + std::to_string(hidden) +
                         " not divisible by head count " +
                         std::to_string(heads));
    }
    if (!(dropout_p >= 0.0) || dropout_p >= 1.0) {
        throw ParamError("dropout probability must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ParamError("epsilon must be positive");
    }
    if ((float_bytes != 4 && float_bytes != 8) || mask_bytes != 1) {
        throw ParamError("unsupported element widths");
    }
}

std::vector<InventoryItem> reference_inventory(const EncoderConfig& cfg) {
    cfg.validate();
    std::int64_t B = cfg.batch, S = cfg.seq, H = cfg.hidden, A = cfg.heads;
    std::int64_t d = cfg.head_dim();
    std::int64_t fb = cfg.float_bytes, mb = cfg.mask_bytes;
    namespace an = activation;

    std::vector<InventoryItem> inv;
    auto put = [&inv](const char* name, Shape shape, std::int64_t elem_bytes) {
        InventoryItem item;
        item.name = name;
        item.bytes = shape_numel(shape) * elem_bytes;
        item.shape = std::move(shape);
        item.elem_bytes = elem_bytes;
        inv.push_back(std::move(item));
    };

    put(an::input, {B, S, H}, fb);
    put(an::attn_q, {B, A, S, d}, fb);
    put(an::attn_k, {B, A, S, d}, fb);
    put(an::attn_v, {B, A, S, d}, fb);
    put(an::attn_scores, {B, A, S, S}, fb);
    put(an::attn_probs, {B, A, S, S}, fb);
    put(an::attn_drop_out, {B, A, S, S}, fb);
    put(an::attn_drop_mask, {B, A, S, S}, mb);
    put(an::attn_context, {B, S, H}, fb);
    put(an::attn_out_drop_mask, {B, S, H}, mb);
    put(an::ln1_input, {B, S, H}, fb);
    put(an::ln1_output, {B, S, H}, fb);
    put(an::ffn_pre_gelu, {B, S, 4 * H}, fb);
    put(an::gelu_output, {B, S, 4 * H}, fb);
    put(an::ffn_drop_mask, {B, S, H}, mb);
    put(an::ln2_input, {B, S, H}, fb);
    return inv;
}

std::int64_t reference_layer_bytes(const EncoderConfig& cfg) {
    std::int64_t total = 0;
    for (const InventoryItem& item : reference_inventory(cfg)) {
        total += item.bytes;
    }
    return total;
}

std::int64_t reference_bytes_per_token(const EncoderConfig& cfg) {
    return reference_layer_bytes(cfg) / cfg.tokens();
}

const char* optimization_name(Optimization opt) {
    switch (opt) {
        case Optimization::InplaceGelu: return "inplace-gelu";
        case Optimization::InplaceLayerNorm: return "inplace-layernorm";
        case Optimization::DropoutRecompute: return "dropout-recompute";
        case Optimization::SoftmaxOutputOnly: return "softmax-output-only";
    }
    return "unknown";
}

Optimization optimization_from_name(const std::string& name) {
    for (Optimization opt : kAllOptimizations) {
        if (name == optimization_name(opt)) return opt;
    }
    throw ParamError("unknown optimization '" + name + "'");
}

std::int64_t saving_bytes_per_token(const EncoderConfig& cfg,
                                    Optimization opt) {
    cfg.validate();
    std::int64_t H = cfg.hidden, AS = cfg.heads * cfg.seq;
    std::int64_t fb = cfg.float_bytes, mb = cfg.mask_bytes;
    switch (opt) {
        case Optimization::InplaceGelu:
            // 4H floats freed, 4H mask bytes added.
            return 4 * H * fb - 4 * H * mb;
        case Optimization::InplaceLayerNorm:
            // Both LN inputs freed (rstd overhead reported separately).
            return 2 * H * fb;
        case Optimization::DropoutRecompute:
            return AS * fb;
        case Optimization::SoftmaxOutputOnly:
            return AS * fb;
    }
    throw ParamError("unknown optimization");
}

double saving_fraction(const EncoderConfig& cfg, Optimization opt) {
    return double(saving_bytes_per_token(cfg, opt)) /
           double(reference_bytes_per_token(cfg));
}

std::int64_t rstd_overhead_per_token(const EncoderConfig& cfg) {
    cfg.validate();
    return 2 * cfg.float_bytes;
}

std::int64_t combined_net_saving_per_token(const EncoderConfig& cfg) {
    std::int64_t gross = 0;
    for (Optimization opt : kAllOptimizations) {
        gross += saving_bytes_per_token(cfg, opt);
    }
    return gross - rstd_overhead_per_token(cfg);
}

std::int64_t optimized_bytes_per_token(const EncoderConfig& cfg) {
    return reference_bytes_per_token(cfg) -
           combined_net_saving_per_token(cfg);
}

NamedFractions named_fractions(const EncoderConfig& cfg) {
    cfg.validate();
    double total = double(reference_bytes_per_token(cfg));
    NamedFractions f;
    f.attention_maps_share =
        double(3 * cfg.float_bytes * cfg.heads * cfg.seq) / total;
    f.gelu_input_share = double(4 * cfg.hidden * cfg.float_bytes) / total;
    return f;
}

MemoryReport build_report(const EncoderConfig& cfg) {
    MemoryReport r;
    r.cfg = cfg;
    r.inventory = reference_inventory(cfg);
    r.reference_per_token = reference_bytes_per_token(cfg);
    r.reference_per_layer = reference_layer_bytes(cfg);
    r.reference_total = r.reference_per_layer * cfg.layers;
    for (Optimization opt : kAllOptimizations) {
        r.savings.push_back({opt, saving_bytes_per_token(cfg, opt),
                             saving_fraction(cfg, opt)});
    }
    r.rstd_overhead_per_token = rstd_overhead_per_token(cfg);
    r.optimized_per_token = optimized_bytes_per_token(cfg);
    r.fractions = named_fractions(cfg);
    return r;
}

CrossCheck cross_check_reference(const EncoderConfig& cfg,
                                 const StashLedger& ledger) {
    CrossCheck out;
    std::map<std::string, std::int64_t> model;
    for (const InventoryItem& item : reference_inventory(cfg)) {
        model[item.name] += item.bytes;
        out.model_total += item.bytes;
    }
    std::map<std::string, std::int64_t> live = ledger.live_by_tag();
    for (const auto& [tag, bytes] : live) out.ledger_total += bytes;

    for (const auto& [name, bytes] : model) {
        auto it = live.find(name);
        std::int64_t have = it == live.end() ? 0 : it->second;
        if (have != bytes) out.diffs.push_back({name, bytes, have});
    }
    for (const auto& [tag, bytes] : live) {
        if (!model.count(tag)) out.diffs.push_back({tag, 0, bytes});
    }
    out.ok = out.diffs.empty() && out.model_total == out.ledger_total;
    return out;
}

}  // namespace memory_model
}  // namespace tempo
