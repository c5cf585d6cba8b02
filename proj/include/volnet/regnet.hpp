// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "volnet/layers.hpp"
#include "volnet/rng.hpp"
#include "volnet/tensor.hpp"

namespace volnet {

/// Architecture of a 3-D RegNet: stem -> stages of bottleneck blocks -> head.
struct RegNetConfig {
    std::vector<std::size_t> stage_depths;   // blocks per stage, each >= 1
    std::vector<std::size_t> stage_widths;   // block output width per stage
    std::vector<std::size_t> group_widths;   // channels per group in the 3x3x3 conv
    double bottleneck_ratio = 1.0;           // inner width = round(width * ratio)
    std::size_t stem_width = 32;
    std::size_t num_classes = 1;
    std::size_t input_channels = 1;

    /// Throws ConfigError on unequal list lengths, zero widths/depths, or an
    /// inner width that is not a multiple of the stage's group width.
    void validate() const;

    std::size_t num_stages() const { return stage_depths.size(); }
    std::size_t inner_width(std::size_t stage) const;
    std::size_t group_count(std::size_t stage) const { return inner_width(stage) / group_widths[stage]; }

    /// The main architecture row: depths [2,6,12,4], widths [48,128,256,512],
    /// group widths 8, b = 1, stem 32, one logit.
    static RegNetConfig reference();

    bool operator==(const RegNetConfig&) const = default;
};

/// Non-owning view of a named tensor inside a model.
template <typename TensorT>
struct NamedRef {
    std::string name;
    TensorT* tensor;
};

/// Conv (no bias) followed by batch norm; keeps what its backward needs.
template <typename T>
struct ConvBn {
    Conv3dLayer<T> conv;
    BatchNorm3dLayer<T> bn;
    BasicTensor<T> saved_input;
    BatchNormCache<T> bn_cache;

    BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode);
    /// Writes weight/gamma/beta gradients into the parameters' grad buffers.
    BasicTensor<T> backward(const BasicTensor<T>& grad_out);
};

/// 1x1x1 -> 3x3x3 grouped -> 1x1x1, each followed by BN; ReLU after the first
/// two; shortcut added after the third BN and a final ReLU.
template <typename T>
struct BottleneckBlock {
    ConvBn<T> reduce;    // 1x1x1, -> inner width
    ConvBn<T> grouped;   // 3x3x3 grouped, carries the block stride
    ConvBn<T> expand;    // 1x1x1, -> block width
    bool has_projection = false;
    ConvBn<T> projection;  // 1x1x1 strided shortcut (first block of a stage)

    BasicTensor<T> saved_reduce_out;   // post-ReLU, doubles as the ReLU mask
    BasicTensor<T> saved_grouped_out;
    BasicTensor<T> saved_output;

    BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, bool residual);
    BasicTensor<T> backward(const BasicTensor<T>& grad_out, bool residual);
};

template <typename T>
class BasicModel {
public:
    /// Builds the topology from `config` and He-initializes every conv and the
    /// head weight in parameter order; BN gamma=1, beta=0; head bias 0.
    static BasicModel build(const RegNetConfig& config, Rng& rng);

    const RegNetConfig& config() const { return config_; }

    /// [N, C_in, D, H, W] -> logits [N, num_classes]. Train mode uses batch
    /// statistics, updates BN running stats and saves activations for backward.
    BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode);

    /// Back-propagates d(loss)/d(logits) and overwrites every parameter's grad
    /// buffer. Requires a preceding train-mode forward; consumes its state.
    void backward(const BasicTensor<T>& logits_grad);

    /// Trainable tensors in a fixed, config-determined order with unique names.
    std::vector<NamedRef<BasicTensor<T>>> parameters();
    std::vector<NamedRef<const BasicTensor<T>>> parameters() const;
    /// BN running statistics.
    std::vector<NamedRef<BasicTensor<T>>> buffers();
    std::vector<NamedRef<const BasicTensor<T>>> buffers() const;

    std::size_t parameter_count() const;

    /// Spatial extents after the stem and after each stage for a given input.
    /// Throws ShapeError naming the stage that would downsample an extent below 2.
    std::vector<Extent3> stage_extents(const Extent3& input) const;

    /// Ablation switch: when false every block drops its shortcut branch.
    bool residual_enabled = true;

    /// Copy with a different storage type (e.g. 64-bit for gradient checks).
    template <typename U>
    BasicModel<U> cast() const;

private:
    template <typename Self, typename Fn>
    static void visit_parameters(Self& self, Fn&& fn);
    template <typename Self, typename Fn>
    static void visit_buffers(Self& self, Fn&& fn);

    RegNetConfig config_;
    ConvBn<T> stem_;
    BasicTensor<T> saved_stem_out_;
    std::vector<std::vector<BottleneckBlock<T>>> stages_;
    LinearLayer<T> head_;
    Shape saved_pool_input_shape_;
    BasicTensor<T> saved_pooled_;
    bool ready_for_backward_ = false;
};

using Model = BasicModel<float>;

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
    Rng scratch(0);
    BasicModel<U> out = BasicModel<U>::build(config_, scratch);
    out.residual_enabled = residual_enabled;
    auto src_p = parameters();
    auto dst_p = out.parameters();
    for (std::size_t i = 0; i < src_p.size(); ++i) {
        *dst_p[i].tensor = src_p[i].tensor->template cast<U>();
    }
    auto src_b = buffers();
    auto dst_b = out.buffers();
    for (std::size_t i = 0; i < src_b.size(); ++i) {
        *dst_b[i].tensor = src_b[i].tensor->template cast<U>();
    }
    return out;
}

}  // namespace volnet
