// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient verification. The objective is re-evaluated
// from scratch for every probe, so anything stochastic (dropout masks) must
// be pinned by the caller's closure for the comparison to mean anything.

#pragma once

#include <functional>

#include "tempo/encoder.hpp"

namespace tempo {
namespace gradcheck {

// |a - b| / max(1, |a|, |b|): relative for large values, absolute near zero.
double rel_err(double a, double b);

struct Options {
    double step = 1e-4;
    double tol = 1e-4;
    // Components probed per tensor; 0 probes every component.
    int samples_per_tensor = 0;
    std::uint64_t seed = 0;
};

struct Result {
    std::int64_t checked = 0;
    std::int64_t failed = 0;
    double worst = 0.0;
    std::string worst_loc;
    bool pass() const { return failed == 0 && checked > 0; }
    void absorb(const Result& other);
};

using Objective = std::function<double(const std::vector<Tensor>&)>;

// Compares analytic gradients against central differences of `objective`
// at `inputs`. `names` labels tensors in failure locations.
Result check(const Objective& objective, const std::vector<Tensor>& inputs,
             const std::vector<Tensor>& analytic,
             const std::vector<std::string>& names, const Options& opts);

// Full-layer check: MSE loss over the encoder output, gradients for the
// input and every parameter. One trial = one draw of input, params, masks.
Result check_layer(const encoder::LayerSpec& spec, std::uint64_t trial_seed,
                   const Options& opts);

}  // namespace gradcheck
}  // namespace tempo
