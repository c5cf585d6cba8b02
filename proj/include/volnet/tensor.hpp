// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volnet/errors.hpp"
#include "volnet/rng.hpp"

namespace volnet {

using Shape = std::vector<std::size_t>;

/// Product of extents; 1 for the empty (scalar) shape. Throws SizeError if the
/// product does not fit in an addressable buffer.
std::size_t shape_product(const Shape& shape);

/// Row-major strides, last axis fastest.
Shape row_major_strides(const Shape& shape);

std::string shape_to_string(const Shape& shape);

/// Dense row-major array with an optional gradient buffer of the same length.
///
/// 5-D activations use N,C,D,H,W axis order. Storage type is a template
/// parameter so the same layer code runs in 32-bit (training) and 64-bit
/// (gradient checking); the engine-wide alias `Tensor` is the 32-bit one.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    /// Scalar zero.
    BasicTensor() : data_(1, T{}) {}

    explicit BasicTensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_product(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_to_string(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    T* raw() { return data_.data(); }
    const T* raw() const { return data_.data(); }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    std::size_t flat_index(std::span<const std::size_t> index) const;
    T& at(std::initializer_list<std::size_t> index) { return data_[flat_index({index.begin(), index.size()})]; }
    const T& at(std::initializer_list<std::size_t> index) const {
        return data_[flat_index({index.begin(), index.size()})];
    }

    bool has_grad() const { return grad_.has_value(); }
    /// Allocates a zeroed gradient buffer if none exists.
    std::span<T> ensure_grad() {
        if (!grad_) {
            grad_.emplace(data_.size(), T{});
        }
        return *grad_;
    }
    std::span<T> grad() {
        if (!grad_) {
            throw StateError("tensor has no gradient buffer");
        }
        return *grad_;
    }
    std::span<const T> grad() const {
        if (!grad_) {
            throw StateError("tensor has no gradient buffer");
        }
        return *grad_;
    }
    void zero_grad() {
        if (grad_) {
            std::fill(grad_->begin(), grad_->end(), T{});
        }
    }
    void drop_grad() { grad_.reset(); }

    /// Same data, new extents with equal product. Gradient is not carried over.
    BasicTensor reshape(Shape shape) const { return BasicTensor(std::move(shape), data_); }
    BasicTensor flatten() const { return reshape({data_.size()}); }

    template <typename U>
    BasicTensor<U> cast() const {
        return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

private:
    Shape shape_;
    std::vector<T> data_;
    std::optional<std::vector<T>> grad_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Same shape and bit-identical payload.
template <typename T>
bool bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> zeros(const Shape& shape);

template <typename T>
BasicTensor<T> full(const Shape& shape, T value);

/// I.i.d. N(0, 2/fan_in) samples drawn in flat order from `rng`.
template <typename T>
BasicTensor<T> he_normal_init(const Shape& shape, std::size_t fan_in, Rng& rng);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

/// Full reductions, accumulated in double in row-major order.
template <typename T>
T reduce_sum(const BasicTensor<T>& a);
template <typename T>
T reduce_mean(const BasicTensor<T>& a);

/// Reduce over a set of axes; the reduced axes are removed from the result.
template <typename T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& a, const std::vector<std::size_t>& axes);
template <typename T>
BasicTensor<T> reduce_mean(const BasicTensor<T>& a, const std::vector<std::size_t>& axes);

}  // namespace volnet
