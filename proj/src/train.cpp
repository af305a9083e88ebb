// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// SGD fitting of one fixed batch, and wall-clock timing of full steps.

#include "tempo/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "tempo/errors.hpp"

namespace tempo {
namespace train {

namespace {

std::uint64_t step_mask_seed(std::uint64_t run_seed, int step) {
    // Distinct mask stream per step, reproducible per run.
    return encoder::mask_stream_seed(run_seed, 0x74726e, step);
}

void sgd_update(encoder::EncoderStack& stack, const encoder::ForwardNodes& fn,
                const GradientMap& grads, double lr) {
    const std::int64_t layers = stack.spec().cfg.layers;
    for (std::int64_t l = 0; l < layers; ++l) {
        std::string prefix = layers > 1 ? "l" + std::to_string(l) + "_" : "";
        for (auto& [name, tensor] : stack.params()[l].named()) {
            NodeId node = fn.params.at(prefix + name);
            if (!grads.has(node)) {
                continue;  // parameter did not influence the loss
            }
            const Tensor& grad = grads.at(node);
            for (std::int64_t i = 0; i < tensor->numel(); ++i) {
                tensor->set(i, tensor->get(i) - lr * grad.get(i));
            }
        }
    }
}

}  // namespace

TrainResult run(const encoder::LayerSpec& spec, const TrainConfig& tc) {
    if (tc.steps <= 0) {
        throw ParamError("training needs a positive step count");
    }
    if (!(tc.lr > 0.0) || !std::isfinite(tc.lr)) {
        throw ParamError("training needs a positive finite learning rate");
    }
    encoder::EncoderStack stack(spec);
    const auto& cfg = spec.cfg;
    Shape xshape{cfg.batch, cfg.seq, cfg.hidden};
    Tensor x = Tensor::randn(xshape, tc.seed + 17, spec.dtype);
    Tensor target = Tensor::randn(xshape, tc.seed + 29, spec.dtype);

    TrainResult result;
    result.history.reserve(static_cast<std::size_t>(tc.steps));
    for (int step = 0; step < tc.steps; ++step) {
        Graph g;
        auto fn = stack.forward(g, x, step_mask_seed(tc.seed, step));
        NodeId loss_node = g.mse_loss(fn.output, target, "loss");
        double loss = g.value(loss_node).get(0);
        if (!std::isfinite(loss)) {
            throw InvariantError("training loss became non-finite at step " +
                                 std::to_string(step));
        }
        GradientMap grads = g.backward_scalar(loss_node);
        sgd_update(stack, fn, grads, tc.lr);
        result.history.push_back({step, loss});
        result.final_loss = loss;
        result.peak_bytes = g.ledger.peak_bytes();
    }
    return result;
}

BenchReport bench(const encoder::EncoderConfig& cfg,
                  const GeluPolyTable* table, int reps, Dtype dt,
                  std::uint64_t seed) {
    if (reps <= 0) {
        throw ParamError("bench needs a positive rep count");
    }
    cfg.validate();
    BenchReport report;
    for (encoder::Variant v :
         {encoder::Variant::Reference, encoder::Variant::Tempo}) {
        encoder::LayerSpec spec;
        spec.cfg = cfg;
        spec.variant = v;
        spec.dtype = dt;
        spec.gelu_table = table;
        spec.param_seed = seed;
        encoder::EncoderStack stack(spec);
        Shape xshape{cfg.batch, cfg.seq, cfg.hidden};
        Tensor x = Tensor::randn(xshape, seed + 17, dt);
        Tensor target = Tensor::randn(xshape, seed + 29, dt);

        auto one_step = [&](int rep) {
            Graph g;
            auto fn = stack.forward(g, x, step_mask_seed(seed, rep));
            NodeId loss = g.mse_loss(fn.output, target, "loss");
            g.backward_scalar(loss);
        };
        one_step(-1);  // warm caches outside the timed region

        auto start = std::chrono::steady_clock::now();
        for (int rep = 0; rep < reps; ++rep) {
            one_step(rep);
        }
        auto stop = std::chrono::steady_clock::now();
        double total_ms =
            std::chrono::duration<double, std::milli>(stop - start).count();

        BenchRow row;
        row.variant = encoder::variant_name(v);
        row.reps = reps;
        row.tokens = cfg.tokens();
        row.mean_ms = total_ms / reps;
        row.tokens_per_s =
            row.mean_ms > 0.0 ? row.tokens * 1000.0 / row.mean_ms : 0.0;
        report.rows.push_back(row);
    }
    return report;
}

std::string bench_csv(const BenchReport& report) {
    std::ostringstream out;
    out << "variant,reps,tokens_per_step,mean_ms,tokens_per_s\n";
    for (const auto& row : report.rows) {
        out << row.variant << ',' << row.reps << ',' << row.tokens << ','
            << row.mean_ms << ',' << row.tokens_per_s << '\n';
    }
    return out.str();
}

}  // namespace train
}  // namespace tempo
