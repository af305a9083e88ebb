// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Shape-checked dense kernels. All of them are deterministic and
// single-threaded; batched matmul variants treat every leading dimension as
// batch and the right-hand side may instead be rank-2 and shared across the
// batch.

#pragma once

#include "tempo/tensor.hpp"

namespace tempo {

// [.., m, k] x [.., k, n] -> [.., m, n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [.., m, k] x [.., n, k] -> [.., m, n]  (rhs transposed on its last two dims)
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// [.., k, m] x [.., k, n] -> [.., m, n]  (lhs transposed on its last two dims)
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose_last2(const Tensor& a);

struct RowMoments {
    Tensor mean;  // shape = input shape minus last dim
    Tensor var;   // population variance (divide by M, not M-1)
};
RowMoments row_moments(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// bias is rank-1 and matches the last dimension of x.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Sum over all leading dims: gradient of add_bias w.r.t. the bias.
Tensor sum_to_bias(const Tensor& g);

// [B, S, H] -> [B, A, S, H/A]; H must be divisible by A.
Tensor split_heads(const Tensor& x, std::int64_t heads);
// [B, A, S, d] -> [B, S, A*d]
Tensor merge_heads(const Tensor& x);

// x * mask * s elementwise; mask shape must equal x shape.
Tensor mask_scale(const Tensor& x, const BoolMask& mask, double s);

double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

double mse(const Tensor& pred, const Tensor& target);
Tensor mse_grad(const Tensor& pred, const Tensor& target);

}  // namespace tempo
