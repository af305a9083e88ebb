// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar math shared by the operator implementations. GELU uses the exact
// Gaussian CDF (erf form), not the tanh approximation.

#pragma once

#include <cmath>

namespace tempo {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Standard normal CDF. erfc keeps the left tail accurate.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

// Standard normal PDF.
inline double normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double gelu(double x) {
    return x * normal_cdf(x);
}

inline double gelu_prime(double x) {
    return normal_cdf(x) + x * normal_pdf(x);
}

}  // namespace tempo
