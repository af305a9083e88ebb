// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/gelu_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tempo/math.hpp"

namespace tempo {
namespace fit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fraction of the sweep tolerance the per-segment fit aims for, leaving
// headroom for points the validation grid misses.
constexpr double kFitMargin = 0.9;

double clenshaw(const std::vector<double>& c, double t) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        double b = 2.0 * t * b1 - b2 + c[k];
        b2 = b1;
        b1 = b;
    }
    return t * b1 - b2 + c[0];
}

// Gaussian elimination with partial pivoting; n stays <= max_degree + 1.
std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                std::vector<double> b) {
    std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (std::abs(a[piv][col]) < 1e-300) {
            throw FitError("normal equations singular");
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= a[i][j] * x[j];
        x[i] = acc / a[i][i];
    }
    return x;
}

}  // namespace

GeluMinimum locate_minimum(double lo, double hi, double xtol) {
    if (!(lo < hi) || !(xtol > 0.0)) {
        throw ParamError("locate_minimum needs lo < hi and xtol > 0");
    }
    double flo = gelu_prime(lo);
    double fhi = gelu_prime(hi);
    if (!(flo < 0.0) || !(fhi > 0.0)) {
        throw ParamError("GELU' does not change sign on the given bracket");
    }
    int guard = 0;
    while (hi - lo > xtol && ++guard < 200) {
        double mid = 0.5 * (lo + hi);
        if (gelu_prime(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double x_star = 0.5 * (lo + hi);
    return {x_star, gelu(x_star)};
}

double invert_gelu(double y, int branch, const GeluMinimum& minimum,
                   double xtol) {
    if (branch != 0 && branch != 1) {
        throw ParamError("branch must be 0 or 1");
    }
    if (y < minimum.y_min) {
        throw DomainError("no GELU input produces output below the minimum");
    }
    if (y == minimum.y_min) return minimum.x_star;

    double a, b;
    if (branch == 0) {
        // Left of the minimum GELU is negative and decreasing; outputs live
        // in [y_min, 0).
        if (y >= 0.0) {
            throw DomainError("left-branch outputs are negative");
        }
        double delta = 1.0;
        a = minimum.x_star - delta;
        while (!(gelu(a) > y)) {
            delta *= 2.0;
            if (delta > 1e6) {
                throw InvariantError("left bracket expansion failed");
            }
            a = minimum.x_star - delta;
        }
        b = minimum.x_star;
        int guard = 0;
        while (b - a > xtol && ++guard < 200) {
            double mid = 0.5 * (a + b);
            if (gelu(mid) > y) {
                a = mid;
            } else {
                b = mid;
            }
        }
        return 0.5 * (a + b);
    }
    // Right of the minimum GELU is increasing toward +inf.
    a = minimum.x_star;
    double delta = 1.0;
    b = minimum.x_star + delta;
    while (gelu(b) < y) {
        delta *= 2.0;
        if (delta > 1e9) {
            throw InvariantError("right bracket expansion failed");
        }
        b = minimum.x_star + delta;
    }
    int guard = 0;
    while (b - a > xtol && ++guard < 200) {
        double mid = 0.5 * (a + b);
        if (gelu(mid) < y) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

double composed_derivative(double y, int branch, const GeluMinimum& minimum) {
    return gelu_prime(invert_gelu(y, branch, minimum));
}

namespace {

// Segment currently being fitted, in transformed coordinates.
struct SegmentFrame {
    int branch;
    double lo, hi;  // output-space bounds
    SegmentVariable var;
    double u_lo, u_hi;
};

SegmentFrame make_frame(int branch, double lo, double hi,
                        const GeluMinimum& minimum) {
    SegmentFrame f;
    f.branch = branch;
    f.lo = lo;
    f.hi = hi;
    f.var = (lo == minimum.y_min) ? SegmentVariable::SqrtShift
                                  : SegmentVariable::DirectY;
    if (f.var == SegmentVariable::SqrtShift) {
        f.u_lo = 0.0;
        f.u_hi = std::sqrt(hi - minimum.y_min);
    } else {
        f.u_lo = lo;
        f.u_hi = hi;
    }
    return f;
}

double u_to_y(const SegmentFrame& f, const GeluMinimum& minimum, double u) {
    double y = f.var == SegmentVariable::SqrtShift ? minimum.y_min + u * u : u;
    // The left branch's upper boundary (output 0) is outside the invertible
    // range; validation clamps to the closest representable output.
    if (f.branch == 0 && y >= 0.0) {
        y = -std::numeric_limits<double>::denorm_min();
    }
    return y;
}

class SegmentFitter {
public:
    SegmentFitter(const GeluMinimum& minimum, const FitOptions& opts)
        : minimum_(minimum), opts_(opts) {}

    // Tile [lo, hi) of `branch`, splitting until every piece fits within the
    // margin at degree <= max_degree.
    void fit_range(int branch, double lo, double hi,
                   std::vector<PolySegment>& out, bool force_split,
                   int depth = 0) {
        if (depth > 60 || !(hi - lo > 1e-12)) {
            throw FitError("segment split budget exhausted near " +
                           std::to_string(lo));
        }
        if (!force_split) {
            PolySegment seg;
            if (try_fit(branch, lo, hi, seg)) {
                out.push_back(std::move(seg));
                return;
            }
        }
        double mid = split_point(branch, lo, hi);
        fit_range(branch, lo, mid, out, false, depth + 1);
        fit_range(branch, mid, hi, out, false, depth + 1);
    }

private:
    double split_point(int branch, double lo, double hi) const {
        SegmentFrame f = make_frame(branch, lo, hi, minimum_);
        double u_mid = 0.5 * (f.u_lo + f.u_hi);
        return f.var == SegmentVariable::SqrtShift
                   ? minimum_.y_min + u_mid * u_mid
                   : u_mid;
    }

    bool try_fit(int branch, double lo, double hi, PolySegment& out) const {
        SegmentFrame f = make_frame(branch, lo, hi, minimum_);

        // Oracle samples for validation, shared across candidate degrees.
        constexpr int kGrid = 257;
        std::vector<double> grid_t(kGrid), grid_h(kGrid);
        for (int i = 0; i < kGrid; ++i) {
            double u = f.u_lo + (f.u_hi - f.u_lo) * double(i) / (kGrid - 1);
            double y = u_to_y(f, minimum_, u);
            grid_t[i] = 2.0 * (u - f.u_lo) / (f.u_hi - f.u_lo) - 1.0;
            grid_h[i] = composed_derivative(y, branch, minimum_);
        }

        for (int degree = 0; degree <= opts_.max_degree; ++degree) {
            std::vector<double> coeffs = fit_degree(f, degree);
            double worst = 0.0;
            for (int i = 0; i < kGrid; ++i) {
                worst = std::max(
                    worst, std::abs(clenshaw(coeffs, grid_t[i]) - grid_h[i]));
            }
            if (worst <= kFitMargin * opts_.tolerance) {
                out.branch = branch;
                out.lo = lo;
                out.hi = hi;
                out.var = f.var;
                out.coeffs = std::move(coeffs);
                return true;
            }
        }
        return false;
    }

    // Least squares in the Chebyshev basis at oversampled Chebyshev nodes.
    std::vector<double> fit_degree(const SegmentFrame& f, int degree) const {
        int terms = degree + 1;
        int n = std::max(opts_.oversample, 1) * terms;
        std::vector<std::vector<double>> basis(
            n, std::vector<double>(terms, 0.0));
        std::vector<double> rhs(n);
        for (int j = 0; j < n; ++j) {
            double t = std::cos(M_PI * (2.0 * j + 1.0) / (2.0 * n));
            double u = f.u_lo + 0.5 * (t + 1.0) * (f.u_hi - f.u_lo);
            double y = u_to_y(f, minimum_, u);
            rhs[j] = composed_derivative(y, f.branch, minimum_);
            basis[j][0] = 1.0;
            if (terms > 1) basis[j][1] = t;
            for (int k = 2; k < terms; ++k) {
                basis[j][k] = 2.0 * t * basis[j][k - 1] - basis[j][k - 2];
            }
        }
        std::vector<std::vector<double>> gram(
            terms, std::vector<double>(terms, 0.0));
        std::vector<double> proj(terms, 0.0);
        for (int j = 0; j < n; ++j) {
            for (int r = 0; r < terms; ++r) {
                proj[r] += basis[j][r] * rhs[j];
                for (int c = r; c < terms; ++c) {
                    gram[r][c] += basis[j][r] * basis[j][c];
                }
            }
        }
        for (int r = 0; r < terms; ++r) {
            for (int c = 0; c < r; ++c) gram[r][c] = gram[c][r];
        }
        return solve_dense(std::move(gram), std::move(proj));
    }

    GeluMinimum minimum_;
    FitOptions opts_;
};

}  // namespace

SweepResult sweep_error(const GeluPolyTable& table, std::int64_t samples,
                        double x_lo, double x_hi) {
    if (samples < 2) {
        throw ParamError("sweep needs at least two samples");
    }
    const GeluMinimum& minimum = table.minimum();
    SweepResult res;
    res.samples = samples;
    double step = (x_hi - x_lo) / double(samples - 1);
    for (std::int64_t i = 0; i < samples; ++i) {
        double x = x_lo + step * double(i);
        std::uint8_t m = x > minimum.x_star ? 1 : 0;
        double y = gelu(x);
        double err = std::abs(table.eval(y, m) - gelu_prime(x));
        if (err > res.max_error) {
            res.max_error = err;
            res.worst_x = x;
            res.worst_y = y;
            res.worst_branch = m;
        }
    }
    return res;
}

SweepResult verify_table(GeluPolyTable& table, std::int64_t samples) {
    if (table.empty()) {
        throw ConfigError("verify on an empty table");
    }
    SweepResult res = sweep_error(table, samples);
    table.set_verified_max_error(res.max_error);
    return res;
}

GeluPolyTable fit_table(const FitOptions& opts) {
    if (!(opts.tolerance > 0.0)) {
        throw ParamError("fit tolerance must be positive");
    }
    if (opts.max_degree < 0 || opts.max_degree > 63) {
        throw ParamError("max degree out of range");
    }
    GeluMinimum minimum = locate_minimum();
    SegmentFitter fitter(minimum, opts);

    std::vector<PolySegment> segments;
    fitter.fit_range(0, minimum.y_min, 0.0, segments, false);
    fitter.fit_range(1, minimum.y_min, opts.tail_threshold, segments, false);
    PolySegment tail;
    tail.branch = 1;
    tail.lo = opts.tail_threshold;
    tail.hi = kInf;
    tail.var = SegmentVariable::DirectY;
    tail.coeffs = {1.0};
    segments.push_back(std::move(tail));

    GeluPolyTable table(minimum, opts.tolerance, std::move(segments));

    // The sweep probes the input axis far more densely than the fit grids;
    // split whatever segment it catches out and try again.
    for (int round = 0; round <= opts.safety_rounds; ++round) {
        SweepResult res = sweep_error(table, opts.verify_samples);
        if (res.max_error <= opts.tolerance) {
            table.set_verified_max_error(res.max_error);
            return table;
        }
        std::vector<PolySegment> rebuilt;
        bool split_done = false;
        for (int branch = 0; branch < 2; ++branch) {
            for (const PolySegment& s : table.segments(branch)) {
                bool holds_worst = branch == res.worst_branch &&
                                   res.worst_y >= s.lo && res.worst_y < s.hi;
                if (holds_worst && std::isfinite(s.hi)) {
                    fitter.fit_range(branch, s.lo, s.hi, rebuilt, true);
                    split_done = true;
                } else {
                    rebuilt.push_back(s);
                }
            }
        }
        if (!split_done) {
            throw FitError("sweep excursion outside any splittable segment");
        }
        table = GeluPolyTable(minimum, opts.tolerance, std::move(rebuilt));
    }
    throw FitError("fit did not reach tolerance within the split budget");
}

}  // namespace fit
}  // namespace tempo
