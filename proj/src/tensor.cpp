// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0

#include "tempo/tensor.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace tempo {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 0) {
            throw DimensionError("negative dimension in shape " + shape_str(shape));
        }
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

bool shape_eq(const Shape& a, const Shape& b) {
    return a == b;
}

Tensor Tensor::allocate(Shape shape, Dtype dt) {
    auto s = std::make_shared<Storage>();
    std::int64_t n = shape_numel(shape);
    s->shape = std::move(shape);
    s->dt = dt;
    if (dt == Dtype::F32) {
        s->f32.assign(static_cast<std::size_t>(n), 0.0f);
    } else {
        s->f64.assign(static_cast<std::size_t>(n), 0.0);
    }
    return Tensor(std::move(s));
}

Tensor Tensor::zeros(Shape shape, Dtype dt) {
    return allocate(std::move(shape), dt);
}

Tensor Tensor::full(Shape shape, double value, Dtype dt) {
    Tensor t = allocate(std::move(shape), dt);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, value);
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, Dtype dt) {
    Tensor t = allocate(std::move(shape), dt);
    if (static_cast<std::int64_t>(values.size()) != t.numel()) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not fill shape " + shape_str(t.shape()));
    }
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, values[i]);
    return t;
}

Tensor Tensor::randn(Shape shape, std::uint64_t seed, Dtype dt, double scale) {
    Tensor t = allocate(std::move(shape), dt);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, scale * dist(rng));
    return t;
}

Tensor Tensor::uniform(Shape shape, std::uint64_t seed, double lo, double hi,
                       Dtype dt) {
    if (!(lo < hi)) {
        throw ParamError("uniform bounds must satisfy lo < hi");
    }
    Tensor t = allocate(std::move(shape), dt);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, dist(rng));
    return t;
}

const Shape& Tensor::shape() const {
    if (!storage_) throw StateError("shape() on undefined tensor");
    return storage_->shape;
}

std::int64_t Tensor::numel() const {
    if (!storage_) return 0;
    return storage_->dt == Dtype::F32
               ? static_cast<std::int64_t>(storage_->f32.size())
               : static_cast<std::int64_t>(storage_->f64.size());
}

Dtype Tensor::dtype() const {
    if (!storage_) throw StateError("dtype() on undefined tensor");
    return storage_->dt;
}

double Tensor::get(std::int64_t i) const {
    return storage_->get(i);
}

void Tensor::set(std::int64_t i, double v) {
    storage_->set(i, v);
}

const void* Tensor::ident() const {
    return storage_.get();
}

const float* Tensor::f32_data() const {
    if (dtype() != Dtype::F32) throw StateError("f32_data() on f64 tensor");
    return storage_->f32.data();
}

float* Tensor::f32_data() {
    if (dtype() != Dtype::F32) throw StateError("f32_data() on f64 tensor");
    return storage_->f32.data();
}

const double* Tensor::f64_data() const {
    if (dtype() != Dtype::F64) throw StateError("f64_data() on f32 tensor");
    return storage_->f64.data();
}

double* Tensor::f64_data() {
    if (dtype() != Dtype::F64) throw StateError("f64_data() on f32 tensor");
    return storage_->f64.data();
}

const std::string& Tensor::tag() const {
    if (!storage_) throw StateError("tag() on undefined tensor");
    return storage_->tag;
}

void Tensor::set_tag(std::string tag) {
    if (!storage_) throw StateError("set_tag() on undefined tensor");
    storage_->tag = std::move(tag);
}

Tensor Tensor::clone() const {
    if (!storage_) return Tensor();
    auto s = std::make_shared<Storage>(*storage_);
    return Tensor(std::move(s));
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != numel()) {
        throw DimensionError("reshape " + shape_str(this->shape()) + " -> " +
                             shape_str(shape) + " changes element count");
    }
    auto s = std::make_shared<Storage>(*storage_);
    s->shape = std::move(shape);
    return Tensor(std::move(s));
}

Tensor Tensor::astype(Dtype dt) const {
    if (dt == dtype()) return *this;
    Tensor t = allocate(shape(), dt);
    for (std::int64_t i = 0; i < numel(); ++i) t.set(i, get(i));
    return t;
}

bool Tensor::all_finite() const {
    for (std::int64_t i = 0; i < numel(); ++i) {
        if (!std::isfinite(get(i))) return false;
    }
    return true;
}

void Tensor::require_finite(const std::string& context) const {
    if (!all_finite()) {
        throw InvariantError("non-finite value in " + context);
    }
}

BoolMask BoolMask::bernoulli_keep(Shape shape, double drop_p,
                                  std::uint64_t seed) {
    if (!(drop_p >= 0.0) || drop_p >= 1.0) {
        throw ParamError("drop probability must lie in [0, 1), got " +
                         std::to_string(drop_p));
    }
    BoolMask m;
    std::int64_t n = shape_numel(shape);
    m.shape_ = std::move(shape);
    m.bytes_ = std::make_shared<std::vector<std::uint8_t>>(
        static_cast<std::size_t>(n));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::int64_t i = 0; i < n; ++i) {
        (*m.bytes_)[i] = dist(rng) >= drop_p ? 1 : 0;
    }
    return m;
}

BoolMask BoolMask::from_bytes(Shape shape, std::vector<std::uint8_t> bytes) {
    std::int64_t n = shape_numel(shape);
    if (static_cast<std::int64_t>(bytes.size()) != n) {
        throw DimensionError("byte count " + std::to_string(bytes.size()) +
                             " does not fill shape " + shape_str(shape));
    }
    for (std::uint8_t b : bytes) {
        if (b > 1) {
            throw ParamError("mask byte out of {0,1}: " + std::to_string(int(b)));
        }
    }
    BoolMask m;
    m.shape_ = std::move(shape);
    m.bytes_ = std::make_shared<std::vector<std::uint8_t>>(std::move(bytes));
    return m;
}

const Shape& BoolMask::shape() const {
    if (!bytes_) throw StateError("shape() on undefined mask");
    return shape_;
}

std::int64_t BoolMask::numel() const {
    return bytes_ ? static_cast<std::int64_t>(bytes_->size()) : 0;
}

std::uint8_t BoolMask::get(std::int64_t i) const {
    return (*bytes_)[i];
}

const void* BoolMask::ident() const {
    return bytes_.get();
}

}  // namespace tempo
