// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tempo/kernels.hpp"

namespace tempo {
namespace gradcheck {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

void Result::absorb(const Result& other) {
    checked += other.checked;
    failed += other.failed;
    if (other.worst > worst) {
        worst = other.worst;
        worst_loc = other.worst_loc;
    }
}

Result check(const Objective& objective, const std::vector<Tensor>& inputs,
             const std::vector<Tensor>& analytic,
             const std::vector<std::string>& names, const Options& opts) {
    if (inputs.size() != analytic.size() || inputs.size() != names.size()) {
        throw ParamError("gradcheck inputs, gradients and names must align");
    }
    Result res;
    std::mt19937_64 rng(opts.seed);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const Tensor& base = inputs[t];
        if (!shape_eq(base.shape(), analytic[t].shape())) {
            throw DimensionError("analytic gradient for '" + names[t] +
                                 "' has shape " +
                                 shape_str(analytic[t].shape()) +
                                 ", tensor has " + shape_str(base.shape()));
        }
        std::vector<std::int64_t> idx;
        std::int64_t n = base.numel();
        if (opts.samples_per_tensor <= 0 || opts.samples_per_tensor >= n) {
            idx.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
        } else {
            std::uniform_int_distribution<std::int64_t> dist(0, n - 1);
            for (int i = 0; i < opts.samples_per_tensor; ++i) {
                idx.push_back(dist(rng));
            }
            std::sort(idx.begin(), idx.end());
            idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        }
        for (std::int64_t i : idx) {
            std::vector<Tensor> probe(inputs);
            probe[t] = base.clone();
            double x0 = base.get(i);
            probe[t].set(i, x0 + opts.step);
            double up = objective(probe);
            probe[t].set(i, x0 - opts.step);
            double down = objective(probe);
            double fd = (up - down) / (2.0 * opts.step);
            double err = rel_err(fd, analytic[t].get(i));
            res.checked++;
            if (err > res.worst) {
                res.worst = err;
                res.worst_loc = names[t] + "[" + std::to_string(i) + "]";
            }
            if (err > opts.tol) res.failed++;
        }
    }
    return res;
}

Result check_layer(const encoder::LayerSpec& spec, std::uint64_t trial_seed,
                   const Options& opts) {
    encoder::LayerSpec trial_spec = spec;
    trial_spec.param_seed = trial_seed;
    encoder::EncoderStack stack(trial_spec);

    const encoder::EncoderConfig& cfg = spec.cfg;
    Tensor x = Tensor::randn({cfg.batch, cfg.seq, cfg.hidden}, trial_seed + 17,
                             spec.dtype);
    Tensor target = Tensor::randn({cfg.batch, cfg.seq, cfg.hidden},
                                  trial_seed + 29, spec.dtype);
    std::uint64_t mask_seed = trial_seed + 41;

    // Flat input list: x first, then every layer's parameters.
    std::vector<Tensor> inputs{x};
    std::vector<std::string> names{"input"};
    for (std::size_t l = 0; l < stack.params().size(); ++l) {
        for (auto& [name, t] : stack.params()[l].named()) {
            inputs.push_back(*t);
            names.push_back("l" + std::to_string(l) + "." + name);
        }
    }

    auto objective = [&](const std::vector<Tensor>& probe) {
        encoder::EncoderStack eval_stack(trial_spec);
        std::size_t at = 1;
        for (auto& layer : eval_stack.params()) {
            for (auto& [name, t] : layer.named()) *t = probe[at++];
        }
        Graph g;
        encoder::ForwardNodes fn = eval_stack.forward(g, probe[0], mask_seed);
        return tempo::mse(g.value(fn.output), target);
    };

    // Analytic gradients at the base point.
    Graph g;
    encoder::ForwardNodes fn = stack.forward(g, x, mask_seed);
    NodeId loss = g.mse_loss(fn.output, target, "loss");
    GradientMap grads = g.backward_scalar(loss);

    std::vector<Tensor> analytic;
    analytic.push_back(grads.at(fn.input));
    std::size_t at = 1;
    for (std::size_t l = 0; l < stack.params().size(); ++l) {
        std::string prefix = cfg.layers > 1 ? "l" + std::to_string(l) + "_" : "";
        for (auto& [name, t] : stack.params()[l].named()) {
            (void)t;
            NodeId pid = fn.params.at(prefix + name);
            analytic.push_back(grads.at(pid));
            ++at;
        }
    }
    return check(objective, inputs, analytic, names, opts);
}

}  // namespace gradcheck
}  // namespace tempo
