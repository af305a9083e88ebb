// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Builds the GELU derivative-from-output table.
//
// The oracle route inverts GELU numerically (bisection) and composes with
// the analytic derivative; fitting never consults the table being built.
// Verification sweeps the input axis instead: for dense x, compare
// table(GELU(x), branch(x)) against GELU'(x). The two routes stay
// independent so the sweep is meaningful.

#pragma once

#include "tempo/gelu_table.hpp"

namespace tempo {
namespace fit {

// Bisection on GELU' over [lo, hi] (sign change required) to width xtol.
GeluMinimum locate_minimum(double lo = -2.0, double hi = 0.0,
                           double xtol = 1e-12);

// Inverse of GELU restricted to one branch. branch 0 covers x <= x_star
// (outputs in [y_min, 0)), branch 1 covers x >= x_star (outputs in
// [y_min, inf)). Outside those ranges: DomainError.
double invert_gelu(double y, int branch, const GeluMinimum& minimum,
                   double xtol = 1e-13);

// GELU'(GELU^-1(y)) on the given branch; the quantity the table approximates.
double composed_derivative(double y, int branch, const GeluMinimum& minimum);

struct FitOptions {
    double tolerance = 1e-4;
    int max_degree = 13;
    // Beyond this output the right branch is the constant 1.
    double tail_threshold = 8.0;
    // Least-squares nodes per coefficient.
    int oversample = 4;
    // Extra split-and-refit rounds if the sweep finds an excursion.
    int safety_rounds = 20;
    std::int64_t verify_samples = 1'000'000;
};

// Fit, sweep-verify, and stamp the table. Throws FitError if the tolerance
// cannot be met within the degree and split budget.
GeluPolyTable fit_table(const FitOptions& opts = {});

struct SweepResult {
    double max_error = 0.0;
    double worst_x = 0.0;
    double worst_y = 0.0;
    int worst_branch = 1;
    std::int64_t samples = 0;
};

// Dense error sweep over x in [x_lo, x_hi]; does not modify the table.
SweepResult sweep_error(const GeluPolyTable& table, std::int64_t samples,
                        double x_lo = -10.0, double x_hi = 10.0);

// Sweep and stamp table.verified_max_error. Empty tables are a config error.
SweepResult verify_table(GeluPolyTable& table,
                         std::int64_t samples = 1'000'000);

}  // namespace fit
}  // namespace tempo
