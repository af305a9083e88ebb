// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Small training and timing harnesses over the encoder stack. Training fits
// one fixed random batch with SGD; paired runs that share a seed see
// identical parameters, targets and dropout masks, so the operator variant
// is the only difference.

#pragma once

#include "tempo/encoder.hpp"

namespace tempo {
namespace train {

struct TrainConfig {
    int steps = 200;
    double lr = 1e-2;
    std::uint64_t seed = 1;
};

struct StepStat {
    int step = 0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepStat> history;
    double final_loss = 0.0;
    // Ledger readings from the last step's graph.
    std::int64_t peak_bytes = 0;
};

// Throws InvariantError naming the step if the loss goes non-finite.
TrainResult run(const encoder::LayerSpec& spec, const TrainConfig& tc);

struct BenchRow {
    std::string variant;
    int reps = 0;
    std::int64_t tokens = 0;   // per step
    double mean_ms = 0.0;      // forward + backward
    double tokens_per_s = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
};

// Times reference and tempo variants on the same config. reps must be
// positive. Wall-clock numbers are informational only.
BenchReport bench(const encoder::EncoderConfig& cfg,
                  const GeluPolyTable* table, int reps, Dtype dt = Dtype::F32,
                  std::uint64_t seed = 1);

std::string bench_csv(const BenchReport& report);

}  // namespace train
}  // namespace tempo
