// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form activation-memory model for one post-norm transformer encoder
// layer, and the cross-check that ties it to ledger measurements.
//
// With 4-byte floats and 1-byte masks the per-token baseline is
// 66*H + 13*A*S bytes: sixteen feature-sized fp32 tensors (64H) plus two
// hidden dropout masks (2H) plus three attention maps (12AS) plus the
// attention dropout mask (1AS).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempo/ledger.hpp"

namespace tempo {
namespace memory_model {

struct EncoderConfig {
    std::int64_t batch = 1;
    std::int64_t seq = 128;
    std::int64_t hidden = 768;
    std::int64_t heads = 12;
    std::int64_t layers = 1;
    double dropout_p = 0.1;
    double epsilon = 1e-5;
    std::int64_t float_bytes = 4;
    std::int64_t mask_bytes = 1;

    std::int64_t head_dim() const { return hidden / heads; }
    std::int64_t tokens() const { return batch * seq; }
    // Throws ParamError on non-positive sizes, H % A != 0, p outside [0,1),
    // or unsupported element widths.
    void validate() const;
};

// Ledger tags the encoder uses; the inventory below is keyed by the same
// names so the cross-check is exact.
namespace activation {
inline constexpr const char* input = "input";
inline constexpr const char* attn_q = "attn_q";
inline constexpr const char* attn_k = "attn_k";
inline constexpr const char* attn_v = "attn_v";
inline constexpr const char* attn_scores = "attn_scores";
inline constexpr const char* attn_probs = "attn_probs";
inline constexpr const char* attn_drop_out = "attn_drop_out";
inline constexpr const char* attn_drop_mask = "attn_drop_mask";
inline constexpr const char* attn_context = "attn_context";
inline constexpr const char* attn_out_drop_mask = "attn_out_drop_mask";
inline constexpr const char* ln1_input = "ln1_input";
inline constexpr const char* ln1_output = "ln1_output";
inline constexpr const char* ffn_pre_gelu = "ffn_pre_gelu";
inline constexpr const char* gelu_output = "gelu_output";
inline constexpr const char* ffn_drop_mask = "ffn_drop_mask";
inline constexpr const char* ln2_input = "ln2_input";
}  // namespace activation

struct InventoryItem {
    std::string name;
    Shape shape;
    std::int64_t elem_bytes = 0;
    std::int64_t bytes = 0;
};

// Everything the baseline layer keeps alive for backward, absolute bytes.
std::vector<InventoryItem> reference_inventory(const EncoderConfig& cfg);

std::int64_t reference_layer_bytes(const EncoderConfig& cfg);
// reference_layer_bytes / tokens; 66H + 13AS at default widths.
std::int64_t reference_bytes_per_token(const EncoderConfig& cfg);

enum class Optimization {
    InplaceGelu,        // drop the GELU input:          16H -> 4H
    InplaceLayerNorm,   // drop both LN inputs:           8H -> 0
    DropoutRecompute,   // drop the dropped-out map:     4AS -> 0
    SoftmaxOutputOnly,  // drop the softmax input:       4AS -> 0
};
inline constexpr Optimization kAllOptimizations[] = {
    Optimization::InplaceGelu, Optimization::InplaceLayerNorm,
    Optimization::DropoutRecompute, Optimization::SoftmaxOutputOnly};

const char* optimization_name(Optimization opt);
// ParamError for names not in {inplace-gelu, inplace-layernorm,
// dropout-recompute, softmax-output-only}.
Optimization optimization_from_name(const std::string& name);

// Gross per-token saving of one optimization (12H, 8H, 4AS, 4AS).
std::int64_t saving_bytes_per_token(const EncoderConfig& cfg,
                                    Optimization opt);
// saving / baseline per-token total.
double saving_fraction(const EncoderConfig& cfg, Optimization opt);

// Per-token cost of the two retained reciprocal standard deviations.
std::int64_t rstd_overhead_per_token(const EncoderConfig& cfg);
// Sum of gross savings minus the rstd overhead: 20H + 8AS - 8.
std::int64_t combined_net_saving_per_token(const EncoderConfig& cfg);
std::int64_t optimized_bytes_per_token(const EncoderConfig& cfg);

struct NamedFractions {
    // The three [B,A,S,S] maps as a share of the per-layer total.
    double attention_maps_share = 0.0;
    // The GELU input as a share of the per-layer total.
    double gelu_input_share = 0.0;
};
NamedFractions named_fractions(const EncoderConfig& cfg);

struct SavingLine {
    Optimization opt;
    std::int64_t bytes_per_token = 0;
    double fraction = 0.0;
};

struct MemoryReport {
    EncoderConfig cfg;
    std::vector<InventoryItem> inventory;
    std::int64_t reference_per_token = 0;
    std::int64_t reference_per_layer = 0;
    std::int64_t reference_total = 0;  // all layers
    std::vector<SavingLine> savings;
    std::int64_t rstd_overhead_per_token = 0;
    std::int64_t optimized_per_token = 0;
    NamedFractions fractions;
};
MemoryReport build_report(const EncoderConfig& cfg);

struct CrossCheckLine {
    std::string name;
    std::int64_t model_bytes = 0;
    std::int64_t ledger_bytes = 0;
};

struct CrossCheck {
    bool ok = false;
    std::int64_t model_total = 0;
    std::int64_t ledger_total = 0;
    std::vector<CrossCheckLine> diffs;  // only mismatching lines
};

// Compares the analytic inventory against the live entries of a ledger
// filled by one reference-layer forward pass. Byte-exact or it reports
// every offending tag.
CrossCheck cross_check_reference(const EncoderConfig& cfg,
                                 const StashLedger& ledger);

}  // namespace memory_model
}  // namespace tempo
