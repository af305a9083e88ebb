// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/gelu_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace tempo {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& tok) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + tok.size() || tok.empty()) {
        throw ParseError("bad number '" + tok + "' in table");
    }
    return v;
}

// key=value token with a fixed expected key.
double parse_kv(const std::string& tok, const std::string& key) {
    std::string prefix = key + "=";
    if (tok.rfind(prefix, 0) != 0) {
        throw ParseError("expected '" + key + "=...' in table header, got '" +
                         tok + "'");
    }
    return parse_double(tok.substr(prefix.size()));
}

double clenshaw(const std::vector<double>& c, double t) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        double b = 2.0 * t * b1 - b2 + c[k];
        b2 = b1;
        b1 = b;
    }
    return t * b1 - b2 + c[0];
}

}  // namespace

const char* segment_variable_str(SegmentVariable v) {
    return v == SegmentVariable::DirectY ? "direct-y" : "sqrt-shift";
}

double eval_segment(const GeluMinimum& minimum, const PolySegment& seg,
                    double y) {
    if (seg.coeffs.empty()) {
        throw InvariantError("segment without coefficients");
    }
    if (seg.coeffs.size() == 1) return seg.coeffs[0];
    double u, u_lo, u_hi;
    if (seg.var == SegmentVariable::SqrtShift) {
        u = std::sqrt(std::max(y - minimum.y_min, 0.0));
        u_lo = std::sqrt(std::max(seg.lo - minimum.y_min, 0.0));
        u_hi = std::sqrt(seg.hi - minimum.y_min);
    } else {
        u = y;
        u_lo = seg.lo;
        u_hi = seg.hi;
    }
    if (!std::isfinite(u_hi)) {
        throw InvariantError("non-constant segment with infinite bound");
    }
    double t = 2.0 * (u - u_lo) / (u_hi - u_lo) - 1.0;
    t = std::clamp(t, -1.0, 1.0);
    return clenshaw(seg.coeffs, t);
}

GeluPolyTable::GeluPolyTable(GeluMinimum minimum, double tolerance,
                             std::vector<PolySegment> segments)
    : minimum_(minimum), tolerance_(tolerance) {
    if (!(tolerance > 0.0)) {
        throw ParseError("table tolerance must be positive");
    }
    for (PolySegment& s : segments) {
        if (s.branch == 0) {
            left_.push_back(std::move(s));
        } else if (s.branch == 1) {
            right_.push_back(std::move(s));
        } else {
            throw ParseError("segment branch must be 0 or 1");
        }
    }
    auto by_lo = [](const PolySegment& a, const PolySegment& b) {
        return a.lo < b.lo;
    };
    std::sort(left_.begin(), left_.end(), by_lo);
    std::sort(right_.begin(), right_.end(), by_lo);
    validate_tiling();
}

void GeluPolyTable::validate_tiling() const {
    if (left_.empty() || right_.empty()) {
        throw ParseError("table must cover both branches");
    }
    auto check_chain = [&](const std::vector<PolySegment>& segs, int branch,
                           double lo_expect, double hi_expect) {
        double cursor = lo_expect;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const PolySegment& s = segs[i];
            if (s.lo != cursor) {
                throw ParseError("branch " + std::to_string(branch) +
                                 " segments leave a gap at " + g17(cursor));
            }
            if (!(s.lo < s.hi)) {
                throw ParseError("segment bounds not increasing at " +
                                 g17(s.lo));
            }
            if (s.coeffs.empty() || s.coeffs.size() > 64) {
                throw ParseError("segment coefficient count out of range");
            }
            for (double c : s.coeffs) {
                if (!std::isfinite(c)) {
                    throw ParseError("non-finite coefficient in table");
                }
            }
            if (!std::isfinite(s.hi) && s.coeffs.size() != 1) {
                throw ParseError("unbounded segment must be constant");
            }
            if (s.var == SegmentVariable::SqrtShift && s.lo != minimum_.y_min) {
                throw ParseError(
                    "sqrt-shift segment must start at the minimum");
            }
            cursor = s.hi;
        }
        if (cursor != hi_expect) {
            throw ParseError("branch " + std::to_string(branch) +
                             " does not reach " + g17(hi_expect));
        }
    };
    check_chain(left_, 0, minimum_.y_min, 0.0);
    check_chain(right_, 1, minimum_.y_min,
                std::numeric_limits<double>::infinity());
}

void GeluPolyTable::set_verified_max_error(double err) {
    if (!(err >= 0.0)) {
        throw ParamError("verified max error must be non-negative");
    }
    verified_max_error_ = err;
}

const PolySegment& GeluPolyTable::find_segment(double y, int branch) const {
    const auto& segs = branch ? right_ : left_;
    // Last segment whose lo <= y.
    std::size_t lo = 0, hi = segs.size();
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (segs[mid].lo <= y) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return segs[lo];
}

double GeluPolyTable::eval(double y, std::uint8_t m) const {
    if (empty()) {
        throw ConfigError("eval on an empty table");
    }
    if (m > 1) {
        throw ParamError("branch flag must be 0 or 1");
    }
    if (m == 0) {
        // Left of the minimum the output is negative; y >= 0 means the input
        // sat far down the left tail where the derivative underflows.
        if (y >= 0.0) return 0.0;
        if (y < minimum_.y_min) y = minimum_.y_min;
        return eval_segment(minimum_, find_segment(y, 0), y);
    }
    if (y < minimum_.y_min) y = minimum_.y_min;
    return eval_segment(minimum_, find_segment(y, 1), y);
}

const std::vector<PolySegment>& GeluPolyTable::segments(int branch) const {
    if (branch != 0 && branch != 1) {
        throw ParamError("branch must be 0 or 1");
    }
    return branch ? right_ : left_;
}

std::vector<PolySegment>& GeluPolyTable::mutable_segments(int branch) {
    if (branch != 0 && branch != 1) {
        throw ParamError("branch must be 0 or 1");
    }
    return branch ? right_ : left_;
}

std::string GeluPolyTable::serialize() const {
    std::ostringstream os;
    os << "gelu-poly-table v1 x_star=" << g17(minimum_.x_star)
       << " y_min=" << g17(minimum_.y_min) << " tol=" << g17(tolerance_)
       << " max_err=" << g17(verified_max_error_) << "\n";
    auto emit = [&os](const PolySegment& s) {
        os << s.branch << ' ' << g17(s.lo) << ' ' << g17(s.hi) << ' '
           << segment_variable_str(s.var) << ' ' << s.coeffs.size() - 1;
        for (double c : s.coeffs) os << ' ' << g17(c);
        os << "\n";
    };
    for (const PolySegment& s : left_) emit(s);
    for (const PolySegment& s : right_) emit(s);
    return os.str();
}

void GeluPolyTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ParamError("cannot open '" + path + "' for writing");
    }
    out << serialize();
}

GeluPolyTable GeluPolyTable::parse(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty table input");
    }
    std::istringstream hdr(line);
    std::string magic, version, tok;
    hdr >> magic >> version;
    if (magic != "gelu-poly-table") {
        throw ParseError("not a gelu-poly-table file");
    }
    if (version != "v1") {
        throw ParseError("unsupported table version '" + version + "'");
    }
    GeluMinimum minimum;
    if (!(hdr >> tok)) throw ParseError("truncated table header");
    minimum.x_star = parse_kv(tok, "x_star");
    if (!(hdr >> tok)) throw ParseError("truncated table header");
    minimum.y_min = parse_kv(tok, "y_min");
    if (!(hdr >> tok)) throw ParseError("truncated table header");
    double tol = parse_kv(tok, "tol");
    if (!(hdr >> tok)) throw ParseError("truncated table header");
    double max_err = parse_kv(tok, "max_err");
    if (hdr >> tok) {
        throw ParseError("unexpected token '" + tok + "' in table header");
    }

    std::vector<PolySegment> segments;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> toks;
        while (ls >> tok) toks.push_back(tok);
        if (toks.empty()) continue;
        if (toks.size() < 6) {
            throw ParseError("malformed segment line '" + line + "'");
        }
        PolySegment s;
        if (toks[0] == "0") {
            s.branch = 0;
        } else if (toks[0] == "1") {
            s.branch = 1;
        } else {
            throw ParseError("segment branch must be 0 or 1, got '" + toks[0] +
                             "'");
        }
        s.lo = parse_double(toks[1]);
        s.hi = parse_double(toks[2]);
        if (toks[3] == "direct-y") {
            s.var = SegmentVariable::DirectY;
        } else if (toks[3] == "sqrt-shift") {
            s.var = SegmentVariable::SqrtShift;
        } else {
            throw ParseError("unknown segment variable '" + toks[3] + "'");
        }
        long degree = 0;
        try {
            std::size_t pos = 0;
            degree = std::stol(toks[4], &pos);
            if (pos != toks[4].size()) throw std::invalid_argument(toks[4]);
        } catch (const std::exception&) {
            throw ParseError("bad segment degree '" + toks[4] + "'");
        }
        if (degree < 0 || toks.size() != 6 + static_cast<std::size_t>(degree)) {
            throw ParseError("segment degree " + std::to_string(degree) +
                             " does not match coefficient count");
        }
        for (std::size_t i = 5; i < toks.size(); ++i) {
            s.coeffs.push_back(parse_double(toks[i]));
        }
        segments.push_back(std::move(s));
    }
    GeluPolyTable table(minimum, tol, std::move(segments));
    if (max_err >= 0.0) table.set_verified_max_error(max_err);
    return table;
}

GeluPolyTable GeluPolyTable::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

GeluPolyTable GeluPolyTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParamError("cannot open table file '" + path + "'");
    }
    return parse(in);
}

}  // namespace tempo
