// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors and byte-exact boolean masks.
//
// Tensors are cheap shared handles: copies alias the same storage, and the
// storage address doubles as the identity used for ledger deduplication.
// Elements are float (4 bytes) or double (8 bytes); masks are one byte per
// element. There are no strided views; shape changes copy.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tempo/errors.hpp"

namespace tempo {

enum class Dtype { F32, F64 };

inline std::size_t dtype_bytes(Dtype dt) {
    return dt == Dtype::F32 ? 4 : 8;
}

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool shape_eq(const Shape& a, const Shape& b);

class Tensor {
public:
    // Dtype-erased element buffer; exposed so recompute recipes can hold
    // weak references to inputs as lifetime tokens.
    struct Storage;

    Tensor() = default;

    static Tensor zeros(Shape shape, Dtype dt = Dtype::F64);
    static Tensor full(Shape shape, double value, Dtype dt = Dtype::F64);
    static Tensor from_values(Shape shape, std::vector<double> values,
                              Dtype dt = Dtype::F64);
    // Standard normal entries, deterministic in the seed.
    static Tensor randn(Shape shape, std::uint64_t seed, Dtype dt = Dtype::F64,
                        double scale = 1.0);
    // Uniform entries in [lo, hi), deterministic in the seed.
    static Tensor uniform(Shape shape, std::uint64_t seed, double lo, double hi,
                          Dtype dt = Dtype::F64);

    bool defined() const { return storage_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    Dtype dtype() const;
    std::size_t byte_size() const { return numel() * dtype_bytes(dtype()); }

    double get(std::int64_t i) const;
    void set(std::int64_t i, double v);

    // Raw element access for inner loops; throws on dtype mismatch.
    const float* f32_data() const;
    float* f32_data();
    const double* f64_data() const;
    double* f64_data();

    // Storage address; identical for handles that alias the same buffer.
    const void* ident() const;

    const std::string& tag() const;
    void set_tag(std::string tag);

    // Deep copy with fresh identity.
    Tensor clone() const;
    // Same data reinterpreted under a shape with equal element count.
    Tensor reshaped(Shape shape) const;
    Tensor astype(Dtype dt) const;

    bool all_finite() const;
    // Throws InvariantError naming `context` if any element is NaN or inf.
    void require_finite(const std::string& context) const;

    bool same_storage(const Tensor& other) const {
        return storage_ && storage_ == other.storage_;
    }

    // Lifetime token for recompute recipes: a weak reference that can be
    // turned back into a Tensor while the storage is alive.
    std::weak_ptr<Storage> weak_storage() const { return storage_; }
    static Tensor from_storage(std::shared_ptr<Storage> s) {
        return Tensor(std::move(s));
    }

private:
    std::shared_ptr<Storage> storage_;

    explicit Tensor(std::shared_ptr<Storage> s) : storage_(std::move(s)) {}
    static Tensor allocate(Shape shape, Dtype dt);

    friend class BackwardCtx;
};

struct Tensor::Storage {
    Shape shape;
    Dtype dt = Dtype::F64;
    std::vector<float> f32;
    std::vector<double> f64;
    std::string tag;

    double get(std::int64_t i) const {
        return dt == Dtype::F32 ? static_cast<double>(f32[i]) : f64[i];
    }
    void set(std::int64_t i, double v) {
        if (dt == Dtype::F32) {
            f32[i] = static_cast<float>(v);
        } else {
            f64[i] = v;
        }
    }
};

class BoolMask {
public:
    BoolMask() = default;

    // Keep mask for dropout with drop probability p: byte is 1 with
    // probability 1-p, independently per element, deterministic in the seed.
    static BoolMask bernoulli_keep(Shape shape, double drop_p,
                                   std::uint64_t seed);
    // Validates that every byte is 0 or 1.
    static BoolMask from_bytes(Shape shape, std::vector<std::uint8_t> bytes);

    bool defined() const { return bytes_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    std::size_t byte_size() const { return static_cast<std::size_t>(numel()); }

    std::uint8_t get(std::int64_t i) const;

    const void* ident() const;

private:
    Shape shape_;
    std::shared_ptr<std::vector<std::uint8_t>> bytes_;
};

}  // namespace tempo
