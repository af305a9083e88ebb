// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/kernels.hpp"

#include <cmath>

namespace tempo {

namespace {

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype()) {
        throw ParamError(std::string(op) + " requires matching dtypes");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!shape_eq(a.shape(), b.shape())) {
        throw DimensionError(std::string(op) + " shapes " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()) + " differ");
    }
}

std::int64_t leading_count(const Shape& s, std::size_t keep_last) {
    std::int64_t n = 1;
    for (std::size_t i = 0; i + keep_last < s.size(); ++i) n *= s[i];
    return n;
}

// mode 0: a[m,k] b[k,n]; mode 1: a[m,k] b[n,k]; mode 2: a[k,m] b[k,n].
template <typename T>
void matmul_block(const T* a, const T* b, T* c, std::int64_t m, std::int64_t n,
                  std::int64_t k, int mode) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            if (mode == 0) {
                for (std::int64_t l = 0; l < k; ++l)
                    acc += double(a[i * k + l]) * double(b[l * n + j]);
            } else if (mode == 1) {
                for (std::int64_t l = 0; l < k; ++l)
                    acc += double(a[i * k + l]) * double(b[j * k + l]);
            } else {
                for (std::int64_t l = 0; l < k; ++l)
                    acc += double(a[l * m + i]) * double(b[l * n + j]);
            }
            c[i * n + j] = static_cast<T>(acc);
        }
    }
}

// Shared driver for the three transpose modes.
Tensor matmul_impl(const Tensor& a, const Tensor& b, int mode, const char* op) {
    require_same_dtype(a, b, op);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    auto fail = [&] {
        throw DimensionError(std::string(op) + " shapes " + shape_str(sa) +
                             " and " + shape_str(sb) + " incompatible");
    };
    if (sa.size() < 2 || sb.size() < 2) fail();

    // Last-two-dim geometry per mode.
    std::int64_t m, k, kb, n;
    if (mode == 2) {
        k = sa[sa.size() - 2], m = sa[sa.size() - 1];
    } else {
        m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    }
    if (mode == 1) {
        n = sb[sb.size() - 2], kb = sb[sb.size() - 1];
    } else {
        kb = sb[sb.size() - 2], n = sb[sb.size() - 1];
    }
    if (k != kb) fail();

    bool shared_rhs = sb.size() == 2 && sa.size() > 2;
    if (!shared_rhs) {
        if (sa.size() != sb.size()) fail();
        for (std::size_t i = 0; i + 2 < sa.size(); ++i) {
            if (sa[i] != sb[i]) fail();
        }
    }

    Shape out(sa.begin(), sa.end() - 2);
    out.push_back(m);
    out.push_back(n);
    Tensor c = Tensor::zeros(out, a.dtype());

    std::int64_t batches = leading_count(sa, 2);
    std::int64_t a_step = (mode == 2) ? k * m : m * k;
    std::int64_t b_step = shared_rhs ? 0 : ((mode == 1) ? n * k : k * n);
    std::int64_t c_step = m * n;

    if (a.dtype() == Dtype::F32) {
        const float* pa = a.f32_data();
        const float* pb = b.f32_data();
        float* pc = c.f32_data();
        for (std::int64_t bi = 0; bi < batches; ++bi) {
            matmul_block(pa + bi * a_step, pb + bi * b_step, pc + bi * c_step,
                         m, n, k, mode);
        }
    } else {
        const double* pa = a.f64_data();
        const double* pb = b.f64_data();
        double* pc = c.f64_data();
        for (std::int64_t bi = 0; bi < batches; ++bi) {
            matmul_block(pa + bi * a_step, pb + bi * b_step, pc + bi * c_step,
                         m, n, k, mode);
        }
    }
    return c;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    return matmul_impl(a, b, 0, "matmul");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    return matmul_impl(a, b, 1, "matmul_nt");
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    return matmul_impl(a, b, 2, "matmul_tn");
}

Tensor transpose_last2(const Tensor& a) {
    const Shape& s = a.shape();
    if (s.size() < 2) {
        throw DimensionError("transpose_last2 needs rank >= 2, got " +
                             shape_str(s));
    }
    std::int64_t m = s[s.size() - 2];
    std::int64_t n = s[s.size() - 1];
    Shape out(s);
    std::swap(out[out.size() - 2], out[out.size() - 1]);
    Tensor t = Tensor::zeros(out, a.dtype());
    std::int64_t batches = leading_count(s, 2);
    for (std::int64_t bi = 0; bi < batches; ++bi) {
        std::int64_t base = bi * m * n;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                t.set(base + j * m + i, a.get(base + i * n + j));
            }
        }
    }
    return t;
}

RowMoments row_moments(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.empty()) {
        throw DimensionError("row_moments needs rank >= 1");
    }
    std::int64_t m = s.back();
    if (m == 0) {
        throw DimensionError("row_moments over empty last dim " + shape_str(s));
    }
    std::int64_t rows = leading_count(s, 1);
    Shape out(s.begin(), s.end() - 1);
    RowMoments r{Tensor::zeros(out, x.dtype()), Tensor::zeros(out, x.dtype())};
    for (std::int64_t i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < m; ++j) sum += x.get(i * m + j);
        double mean = sum / double(m);
        double sq = 0.0;
        for (std::int64_t j = 0; j < m; ++j) {
            double d = x.get(i * m + j) - mean;
            sq += d * d;
        }
        r.mean.set(i, mean);
        // Centered sum of squares cannot be negative.
        r.var.set(i, sq / double(m));
    }
    return r;
}

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_dtype(a, b, op);
    require_same_shape(a, b, op);
    Tensor c = Tensor::zeros(a.shape(), a.dtype());
    for (std::int64_t i = 0; i < a.numel(); ++i) f(c, i, a.get(i), b.get(i));
    return c;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add",
               [](Tensor& c, std::int64_t i, double x, double y) { c.set(i, x + y); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub",
               [](Tensor& c, std::int64_t i, double x, double y) { c.set(i, x - y); });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    return zip(a, b, "hadamard",
               [](Tensor& c, std::int64_t i, double x, double y) { c.set(i, x * y); });
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    for (std::int64_t i = 0; i < a.numel(); ++i) out.set(i, a.get(i) * c);
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.shape().size() != 1 || bias.shape()[0] != x.shape().back()) {
        throw DimensionError("add_bias shapes " + shape_str(x.shape()) + " and " +
                             shape_str(bias.shape()) + " incompatible");
    }
    require_same_dtype(x, bias, "add_bias");
    std::int64_t m = x.shape().back();
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        out.set(i, x.get(i) + bias.get(i % m));
    }
    return out;
}

Tensor sum_to_bias(const Tensor& g) {
    if (g.shape().empty()) {
        throw DimensionError("sum_to_bias needs rank >= 1");
    }
    std::int64_t m = g.shape().back();
    Tensor out = Tensor::zeros({m}, g.dtype());
    for (std::int64_t i = 0; i < g.numel(); ++i) {
        out.set(i % m, out.get(i % m) + g.get(i));
    }
    return out;
}

Tensor split_heads(const Tensor& x, std::int64_t heads) {
    const Shape& s = x.shape();
    if (s.size() != 3) {
        throw DimensionError("split_heads expects [B,S,H], got " + shape_str(s));
    }
    if (heads <= 0 || s[2] % heads != 0) {
        throw DimensionError("hidden dim " + std::to_string(s[2]) +
                             " not divisible by heads " + std::to_string(heads));
    }
    std::int64_t B = s[0], S = s[1], H = s[2], d = H / heads;
    Tensor out = Tensor::zeros({B, heads, S, d}, x.dtype());
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t t = 0; t < S; ++t) {
            for (std::int64_t a = 0; a < heads; ++a) {
                for (std::int64_t j = 0; j < d; ++j) {
                    out.set(((b * heads + a) * S + t) * d + j,
                            x.get((b * S + t) * H + a * d + j));
                }
            }
        }
    }
    return out;
}

Tensor merge_heads(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.size() != 4) {
        throw DimensionError("merge_heads expects [B,A,S,d], got " + shape_str(s));
    }
    std::int64_t B = s[0], A = s[1], S = s[2], d = s[3];
    Tensor out = Tensor::zeros({B, S, A * d}, x.dtype());
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t a = 0; a < A; ++a) {
            for (std::int64_t t = 0; t < S; ++t) {
                for (std::int64_t j = 0; j < d; ++j) {
                    out.set((b * S + t) * (A * d) + a * d + j,
                            x.get(((b * A + a) * S + t) * d + j));
                }
            }
        }
    }
    return out;
}

Tensor mask_scale(const Tensor& x, const BoolMask& mask, double s) {
    if (!shape_eq(x.shape(), mask.shape())) {
        throw DimensionError("mask_scale shapes " + shape_str(x.shape()) +
                             " and " + shape_str(mask.shape()) + " differ");
    }
    Tensor out = Tensor::zeros(x.shape(), x.dtype());
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        out.set(i, mask.get(i) ? x.get(i) * s : 0.0);
    }
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += a.get(i) * b.get(i);
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(a.get(i) - b.get(i)));
    }
    return worst;
}

double mse(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    double acc = 0.0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        double d = pred.get(i) - target.get(i);
        acc += d * d;
    }
    return acc / double(pred.numel());
}

Tensor mse_grad(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_grad");
    Tensor g = Tensor::zeros(pred.shape(), pred.dtype());
    double c = 2.0 / double(pred.numel());
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        g.set(i, c * (pred.get(i) - target.get(i)));
    }
    return g;
}

}  // namespace tempo
