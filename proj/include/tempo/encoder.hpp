// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Post-norm transformer encoder layer:
//   attention(QKV -> scaled scores -> softmax -> dropout -> context -> proj)
//   -> dropout -> residual -> LN -> FFN(H -> 4H -> GELU -> H) -> dropout
//   -> residual -> LN.
// Every activation the backward pass keeps is tagged with the inventory
// names from memory_model so ledger totals line up with the analytic model.

#pragma once

#include <map>

#include "tempo/gelu_table.hpp"
#include "tempo/graph.hpp"
#include "tempo/memory_model.hpp"

namespace tempo {
namespace encoder {

using memory_model::EncoderConfig;

enum class Variant { Reference, Tempo, Mixed };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct OpToggles {
    bool inplace_gelu = false;
    bool inplace_layernorm = false;
    bool output_only_softmax = false;
    bool recompute_dropout = false;
};

// Reference: all off. Tempo: all on. Mixed: as given.
OpToggles resolve_toggles(Variant v, const OpToggles& mixed);

struct EncoderParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor w1, b1, w2, b2;
    Tensor gamma1, beta1, gamma2, beta2;

    static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed,
                              Dtype dt);
    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<std::pair<std::string, const Tensor*>> named() const;
    EncoderParams clone() const;
};

struct LayerSpec {
    EncoderConfig cfg;
    Variant variant = Variant::Reference;
    OpToggles mixed;  // consulted only when variant == Mixed
    Dtype dtype = Dtype::F64;
    // Required whenever the resolved toggles enable in-place GELU; captured
    // by reference, must outlive every graph built from this spec.
    const GeluPolyTable* gelu_table = nullptr;
    std::uint64_t param_seed = 1;
};

struct ForwardNodes {
    NodeId input = -1;
    NodeId output = -1;
    // Inventory-named intermediate nodes, for equality probes.
    std::map<std::string, NodeId> probes;
    // Parameter name -> leaf node.
    std::map<std::string, NodeId> params;
};

// Builds one layer's forward graph. `prefix` namespaces tags when stacking;
// `mask_salt` decorrelates dropout masks across layers while keeping them
// reproducible in (mask_seed, mask_salt).
ForwardNodes build_layer_forward(Graph& g, const LayerSpec& spec,
                                 const EncoderParams& params, NodeId x,
                                 std::uint64_t mask_seed,
                                 const std::string& prefix = "",
                                 std::uint64_t mask_salt = 0);

// cfg.layers stacked layers sharing one spec. Validates the spec up front:
// H % A != 0 is a build error, in-place GELU without a table is a config
// error.
class EncoderStack {
public:
    explicit EncoderStack(LayerSpec spec);

    const LayerSpec& spec() const { return spec_; }
    std::vector<EncoderParams>& params() { return params_; }
    const std::vector<EncoderParams>& params() const { return params_; }

    ForwardNodes forward(Graph& g, const Tensor& x,
                         std::uint64_t mask_seed) const;

private:
    LayerSpec spec_;
    std::vector<EncoderParams> params_;
};

// Deterministic per-site mask stream.
std::uint64_t mask_stream_seed(std::uint64_t mask_seed, std::uint64_t salt,
                               int site);

}  // namespace encoder
}  // namespace tempo
