// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Piecewise-polynomial table for the GELU derivative as a function of the
// GELU *output* and a one-bit branch flag. The branch flag says which side
// of the GELU minimum the pre-activation was on; together with the output
// that pins the input, so the derivative is well defined.
//
// Segments tile each branch's output range. Coefficients are in the
// Chebyshev basis on the segment, evaluated with Clenshaw recurrence.
// Segments that touch the minimum use sqrt(y - y_min) as their variable
// because the composed derivative has square-root behavior there; the final
// right-branch segment is the constant 1 from the tail threshold to
// infinity.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tempo/errors.hpp"

namespace tempo {

struct GeluMinimum {
    double x_star = 0.0;  // abscissa of the GELU minimum
    double y_min = 0.0;   // GELU(x_star)
};

enum class SegmentVariable { DirectY, SqrtShift };

const char* segment_variable_str(SegmentVariable v);

struct PolySegment {
    int branch = 1;       // 0: input was left of the minimum, 1: right
    double lo = 0.0;      // inclusive output lower bound
    double hi = 0.0;      // exclusive upper bound; +inf only on the tail
    SegmentVariable var = SegmentVariable::DirectY;
    std::vector<double> coeffs;  // Chebyshev basis, degree = size - 1
};

// Evaluate one segment at output value y (no range clamping).
double eval_segment(const GeluMinimum& minimum, const PolySegment& seg,
                    double y);

class GeluPolyTable {
public:
    GeluPolyTable() = default;
    // Validates the tiling invariants; throws ParseError on violation.
    GeluPolyTable(GeluMinimum minimum, double tolerance,
                  std::vector<PolySegment> segments);

    bool empty() const { return left_.empty() && right_.empty(); }
    const GeluMinimum& minimum() const { return minimum_; }
    double tolerance() const { return tolerance_; }

    // Largest absolute error seen by the verification sweep; negative until
    // a sweep has stamped the table.
    double verified_max_error() const { return verified_max_error_; }
    bool verified() const { return !empty() && verified_max_error_ >= 0.0; }
    void set_verified_max_error(double err);

    // Derivative estimate h(y, m). Out-of-range y is clamped to the branch
    // domain; m = 0 with y >= 0 means the input was far in the left tail,
    // where the derivative vanishes.
    double eval(double y, std::uint8_t m) const;

    const std::vector<PolySegment>& segments(int branch) const;
    std::vector<PolySegment>& mutable_segments(int branch);

    // Text form, bitwise round-trippable (17 significant digits):
    //   gelu-poly-table v1 x_star=... y_min=... tol=... max_err=...
    //   <m> <lo> <hi> <variable> <degree> <c0> ... <cd>
    std::string serialize() const;
    void save(const std::string& path) const;
    static GeluPolyTable parse(std::istream& in);
    static GeluPolyTable parse_string(const std::string& text);
    static GeluPolyTable load(const std::string& path);

private:
    GeluMinimum minimum_;
    double tolerance_ = 0.0;
    double verified_max_error_ = -1.0;
    std::vector<PolySegment> left_;   // branch 0, ascending lo
    std::vector<PolySegment> right_;  // branch 1, ascending lo

    void validate_tiling() const;
    const PolySegment& find_segment(double y, int branch) const;
};

}  // namespace tempo
