// SPDX-License-Identifier: Apache-2.0
#include "volnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <tuple>

namespace volnet {

std::size_t shape_product(const Shape& shape) {
    // Cap at what std::vector<double> can hold so every storage type is safe.
    const std::size_t limit = std::numeric_limits<std::ptrdiff_t>::max() / sizeof(double);
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e != 0 && n > limit / e) {
            throw SizeError("shape " + shape_to_string(shape) + " exceeds addressable size");
        }
        n *= e;
    }
    return n;
}

Shape row_major_strides(const Shape& shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) {
        strides[i - 1] = strides[i] * shape[i];
    }
    return strides;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ')';
    return os.str();
}

template <typename T>
std::size_t BasicTensor<T>::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw ShapeError("index rank " + std::to_string(index.size()) + " vs tensor rank " +
                         std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= shape_[i]) {
            throw ShapeError("index out of range on axis " + std::to_string(i));
        }
        flat = flat * shape_[i] + index[i];
    }
    return flat;
}

template <typename T>
bool bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0;
}

template <typename T>
BasicTensor<T> zeros(const Shape& shape) {
    return BasicTensor<T>(shape);
}

template <typename T>
BasicTensor<T> full(const Shape& shape, T value) {
    return BasicTensor<T>(shape, value);
}

template <typename T>
BasicTensor<T> he_normal_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) {
        throw ArgumentError("he_normal_init: fan_in must be >= 1");
    }
    BasicTensor<T> t(shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) {
        v = static_cast<T>(stddev * rng.normal());
    }
    return t;
}

namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "add");
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "mul");
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * factor;
    }
    return out;
}

template <typename T>
T reduce_sum(const BasicTensor<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) {
        acc += static_cast<double>(v);
    }
    return static_cast<T>(acc);
}

template <typename T>
T reduce_mean(const BasicTensor<T>& a) {
    if (a.size() == 0) {
        throw ShapeError("reduce_mean of empty tensor");
    }
    double acc = 0.0;
    for (T v : a.data()) {
        acc += static_cast<double>(v);
    }
    return static_cast<T>(acc / static_cast<double>(a.size()));
}

namespace {

// Sums over `axes` into a double buffer; returns (kept shape, sums, count per output).
template <typename T>
std::tuple<Shape, std::vector<double>, std::size_t> reduce_axes(const BasicTensor<T>& a,
                                                                const std::vector<std::size_t>& axes) {
    const Shape& shape = a.shape();
    std::vector<bool> reduced(shape.size(), false);
    for (std::size_t ax : axes) {
        if (ax >= shape.size()) {
            throw ShapeError("reduce axis " + std::to_string(ax) + " out of range for rank " +
                             std::to_string(shape.size()));
        }
        reduced[ax] = true;
    }
    Shape kept;
    std::size_t count = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (reduced[i]) {
            count *= shape[i];
        } else {
            kept.push_back(shape[i]);
        }
    }
    const Shape kept_strides = row_major_strides(kept);
    std::vector<double> sums(shape_product(kept), 0.0);

    // Walk the input in row-major order so each output accumulates in a fixed order.
    Shape index(shape.size(), 0);
    for (std::size_t flat = 0; flat < a.size(); ++flat) {
        std::size_t out = 0;
        for (std::size_t i = 0, k = 0; i < shape.size(); ++i) {
            if (!reduced[i]) {
                out += index[i] * kept_strides[k++];
            }
        }
        sums[out] += static_cast<double>(a[flat]);
        for (std::size_t i = shape.size(); i-- > 0;) {
            if (++index[i] < shape[i]) {
                break;
            }
            index[i] = 0;
        }
    }
    return {kept, std::move(sums), count};
}

}  // namespace

template <typename T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& a, const std::vector<std::size_t>& axes) {
    auto [kept, sums, count] = reduce_axes(a, axes);
    (void)count;
    return BasicTensor<T>(kept, std::vector<T>(sums.begin(), sums.end()));
}

template <typename T>
BasicTensor<T> reduce_mean(const BasicTensor<T>& a, const std::vector<std::size_t>& axes) {
    auto [kept, sums, count] = reduce_axes(a, axes);
    if (count == 0) {
        throw ShapeError("reduce_mean over empty axes");
    }
    std::vector<T> out(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) {
        out[i] = static_cast<T>(sums[i] / static_cast<double>(count));
    }
    return BasicTensor<T>(kept, std::move(out));
}

#define VOLNET_INSTANTIATE_TENSOR(T)                                                              \
    template class BasicTensor<T>;                                                                \
    template bool bit_equal(const BasicTensor<T>&, const BasicTensor<T>&);                        \
    template BasicTensor<T> zeros<T>(const Shape&);                                               \
    template BasicTensor<T> full<T>(const Shape&, T);                                             \
    template BasicTensor<T> he_normal_init<T>(const Shape&, std::size_t, Rng&);                   \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                      \
    template T reduce_sum(const BasicTensor<T>&);                                                 \
    template T reduce_mean(const BasicTensor<T>&);                                                \
    template BasicTensor<T> reduce_sum(const BasicTensor<T>&, const std::vector<std::size_t>&);   \
    template BasicTensor<T> reduce_mean(const BasicTensor<T>&, const std::vector<std::size_t>&);

VOLNET_INSTANTIATE_TENSOR(float)
VOLNET_INSTANTIATE_TENSOR(double)

#undef VOLNET_INSTANTIATE_TENSOR

}  // namespace volnet
