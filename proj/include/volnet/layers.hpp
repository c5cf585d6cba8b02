// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "volnet/tensor.hpp"

namespace volnet {

using Extent3 = std::array<std::size_t, 3>;

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Grouped 3-D convolution
// ---------------------------------------------------------------------------

/// weight is [C_out, C_in/groups, kD, kH, kW]; bias (optional) is [C_out].
/// Output channel co reads only the input channels of group co / (C_out/groups).
template <typename T>
struct Conv3dLayer {
    BasicTensor<T> weight;
    std::optional<BasicTensor<T>> bias;
    Extent3 stride{1, 1, 1};
    Extent3 padding{0, 0, 0};
    std::size_t groups = 1;

    std::size_t out_channels() const { return weight.extent(0); }
    std::size_t in_channels() const { return weight.extent(1) * groups; }
    Extent3 kernel() const { return {weight.extent(2), weight.extent(3), weight.extent(4)}; }

    /// Throws ShapeError unless the weight is 5-D, groups divide both channel
    /// counts and every kernel extent is at least 1.
    void validate() const;
};

/// Output extents floor((e + 2p - k) / s) + 1 on each spatial axis.
Shape conv3d_output_shape(const Shape& input_shape, std::size_t out_channels, const Extent3& kernel,
                          const Extent3& stride, const Extent3& padding);

template <typename T>
struct Conv3dGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    std::optional<BasicTensor<T>> bias;
};

/// Direct convolution. Each output accumulates in double, taps visited in
/// (kd, kh, kw, c_in) order; out-of-volume taps read implicit zeros.
template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const Conv3dLayer<T>& layer);

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const Conv3dLayer<T>& layer);

// ---------------------------------------------------------------------------
// Batch normalization over (N, D, H, W) per channel
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNorm3dLayer {
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;
    Mode mode = Mode::train;

    /// gamma=1, beta=0, running stats (0, 1).
    static BatchNorm3dLayer make(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
};

/// What backward needs from a train-mode forward.
template <typename T>
struct BatchNormCache {
    BasicTensor<T> normalized;      // x_hat
    std::vector<double> inv_std;    // per channel
};

template <typename T>
struct BatchNormGrads {
    BasicTensor<T> input;
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
};

/// Train mode normalizes with the batch's biased variance and updates the
/// running stats (running_var with the unbiased estimate); eval mode uses the
/// running stats. `cache` may be null when no backward will follow.
template <typename T>
BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>& input, BatchNorm3dLayer<T>& layer,
                                   BatchNormCache<T>* cache = nullptr);

/// Adjoint of the train-mode forward, including the path through the batch
/// statistics. Throws StateError when the layer is in eval mode.
template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& grad_out, const BatchNormCache<T>& cache,
                                       const BatchNorm3dLayer<T>& layer);

// ---------------------------------------------------------------------------
// ReLU, global average pooling, fully connected
// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

/// Passes grad where input > 0. The gradient at exactly 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input);

/// [N,C,D,H,W] -> [N,C]
template <typename T>
BasicTensor<T> global_avg_pool3d_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avg_pool3d_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

/// weight [n_out, n_in], bias [n_out]; y = W x + b per row of a [N, n_in] input.
template <typename T>
struct LinearLayer {
    BasicTensor<T> weight;
    BasicTensor<T> bias;

    std::size_t in_features() const { return weight.extent(1); }
    std::size_t out_features() const { return weight.extent(0); }
};

template <typename T>
struct LinearGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const LinearLayer<T>& layer);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const LinearLayer<T>& layer);

}  // namespace volnet
