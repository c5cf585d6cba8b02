// SPDX-License-Identifier: Apache-2.0
#include "volnet/regnet.hpp"

#include <cmath>
#include <string>

namespace volnet {

void RegNetConfig::validate() const {
    const std::size_t n = stage_depths.size();
    if (n == 0) {
        throw ConfigError("architecture needs at least one stage");
    }
    if (stage_widths.size() != n || group_widths.size() != n) {
        throw ConfigError("stage_depths, stage_widths and group_widths must have equal length (got " +
                          std::to_string(n) + ", " + std::to_string(stage_widths.size()) + ", " +
                          std::to_string(group_widths.size()) + ")");
    }
    if (!(bottleneck_ratio > 0.0) || !std::isfinite(bottleneck_ratio)) {
        throw ConfigError("bottleneck_ratio must be positive");
    }
    if (stem_width == 0 || num_classes == 0 || input_channels == 0) {
        throw ConfigError("stem_width, num_classes and input_channels must be >= 1");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::string where = "stage " + std::to_string(i) + ": ";
        if (stage_depths[i] == 0) {
            throw ConfigError(where + "depth must be >= 1");
        }
        if (stage_widths[i] == 0 || group_widths[i] == 0) {
            throw ConfigError(where + "widths must be positive");
        }
        const std::size_t inner = inner_width(i);
        if (inner == 0 || inner % group_widths[i] != 0) {
            throw ConfigError(where + "inner width " + std::to_string(inner) +
                              " is not a multiple of group width " + std::to_string(group_widths[i]));
        }
    }
}

std::size_t RegNetConfig::inner_width(std::size_t stage) const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(stage_widths.at(stage)) * bottleneck_ratio));
}

RegNetConfig RegNetConfig::reference() {
    RegNetConfig c;
    c.stage_depths = {2, 6, 12, 4};
    c.stage_widths = {48, 128, 256, 512};
    c.group_widths = {8, 8, 8, 8};
    c.bottleneck_ratio = 1.0;
    c.stem_width = 32;
    c.num_classes = 1;
    return c;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void store_grad(BasicTensor<T>& param, const BasicTensor<T>& grad) {
    auto dst = param.ensure_grad();
    std::copy(grad.data().begin(), grad.data().end(), dst.begin());
}

template <typename T>
ConvBn<T> make_conv_bn(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride,
                       std::size_t groups, Rng& rng) {
    ConvBn<T> unit;
    const std::size_t fan_in = (cin / groups) * kernel * kernel * kernel;
    unit.conv.weight = he_normal_init<T>({cout, cin / groups, kernel, kernel, kernel}, fan_in, rng);
    unit.conv.stride = {stride, stride, stride};
    const std::size_t pad = kernel / 2;
    unit.conv.padding = {pad, pad, pad};
    unit.conv.groups = groups;
    unit.bn = BatchNorm3dLayer<T>::make(cout);
    return unit;
}

template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] += b[i];
    }
}

}  // namespace

template <typename T>
BasicTensor<T> ConvBn<T>::forward(const BasicTensor<T>& x, Mode mode) {
    bn.mode = mode;
    BasicTensor<T> c = conv3d_forward(x, conv);
    if (mode == Mode::train) {
        saved_input = x;
        return batchnorm3d_forward(c, bn, &bn_cache);
    }
    return batchnorm3d_forward<T>(c, bn, nullptr);
}

template <typename T>
BasicTensor<T> ConvBn<T>::backward(const BasicTensor<T>& grad_out) {
    BatchNormGrads<T> bg = batchnorm3d_backward(grad_out, bn_cache, bn);
    store_grad(bn.gamma, bg.gamma);
    store_grad(bn.beta, bg.beta);
    Conv3dGrads<T> cg = conv3d_backward(bg.input, saved_input, conv);
    store_grad(conv.weight, cg.weight);
    saved_input = BasicTensor<T>();
    bn_cache = BatchNormCache<T>();
    return std::move(cg.input);
}

template <typename T>
BasicTensor<T> BottleneckBlock<T>::forward(const BasicTensor<T>& x, Mode mode, bool residual) {
    BasicTensor<T> a = relu_forward(reduce.forward(x, mode));
    BasicTensor<T> b = relu_forward(grouped.forward(a, mode));
    BasicTensor<T> sum = expand.forward(b, mode);
    if (residual) {
        if (has_projection) {
            add_inplace(sum, projection.forward(x, mode));
        } else {
            add_inplace(sum, x);
        }
    }
    BasicTensor<T> out = relu_forward(sum);
    if (mode == Mode::train) {
        saved_reduce_out = std::move(a);
        saved_grouped_out = std::move(b);
        saved_output = out;
    }
    return out;
}

template <typename T>
BasicTensor<T> BottleneckBlock<T>::backward(const BasicTensor<T>& grad_out, bool residual) {
    const BasicTensor<T> g_sum = relu_backward(grad_out, saved_output);
    BasicTensor<T> g = expand.backward(g_sum);
    g = grouped.backward(relu_backward(g, saved_grouped_out));
    BasicTensor<T> g_in = reduce.backward(relu_backward(g, saved_reduce_out));
    if (residual) {
        if (has_projection) {
            add_inplace(g_in, projection.backward(g_sum));
        } else {
            add_inplace(g_in, g_sum);
        }
    } else if (has_projection) {
        // Shortcut branch absent: its parameters receive zero gradient.
        projection.conv.weight.ensure_grad();
        projection.conv.weight.zero_grad();
        projection.bn.gamma.ensure_grad();
        projection.bn.gamma.zero_grad();
        projection.bn.beta.ensure_grad();
        projection.bn.beta.zero_grad();
    }
    saved_reduce_out = BasicTensor<T>();
    saved_grouped_out = BasicTensor<T>();
    saved_output = BasicTensor<T>();
    return g_in;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicModel<T> BasicModel<T>::build(const RegNetConfig& config, Rng& rng) {
    config.validate();
    BasicModel model;
    model.config_ = config;
    model.stem_ = make_conv_bn<T>(config.input_channels, config.stem_width, 3, 1, 1, rng);

    std::size_t in_width = config.stem_width;
    model.stages_.resize(config.num_stages());
    for (std::size_t s = 0; s < config.num_stages(); ++s) {
        const std::size_t width = config.stage_widths[s];
        const std::size_t inner = config.inner_width(s);
        const std::size_t groups = config.group_count(s);
        for (std::size_t b = 0; b < config.stage_depths[s]; ++b) {
            const std::size_t stride = b == 0 ? 2 : 1;
            BottleneckBlock<T> block;
            block.reduce = make_conv_bn<T>(in_width, inner, 1, 1, 1, rng);
            block.grouped = make_conv_bn<T>(inner, inner, 3, stride, groups, rng);
            block.expand = make_conv_bn<T>(inner, width, 1, 1, 1, rng);
            if (b == 0) {
                block.has_projection = true;
                block.projection = make_conv_bn<T>(in_width, width, 1, 2, 1, rng);
            }
            model.stages_[s].push_back(std::move(block));
            in_width = width;
        }
    }
    model.head_.weight = he_normal_init<T>({config.num_classes, in_width}, in_width, rng);
    model.head_.bias = BasicTensor<T>({config.num_classes});
    return model;
}

template <typename T>
std::vector<Extent3> BasicModel<T>::stage_extents(const Extent3& input) const {
    std::vector<Extent3> out{input};  // the stem preserves extents
    Extent3 e = input;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        for (std::size_t a = 0; a < 3; ++a) {
            if (e[a] < 2) {
                throw ShapeError("input too small: stage " + std::to_string(s) + " receives spatial extent " +
                                 std::to_string(e[a]) + " on axis " + std::to_string(a) +
                                 " and cannot downsample it (need >= 2)");
            }
            e[a] = (e[a] - 1) / 2 + 1;
        }
        out.push_back(e);
    }
    return out;
}

template <typename T>
BasicTensor<T> BasicModel<T>::forward(const BasicTensor<T>& batch, Mode mode) {
    if (batch.rank() != 5 || batch.extent(1) != config_.input_channels) {
        throw ShapeError("model input must be [N, " + std::to_string(config_.input_channels) +
                         ", D, H, W], got " + shape_to_string(batch.shape()));
    }
    stage_extents({batch.extent(2), batch.extent(3), batch.extent(4)});
    ready_for_backward_ = false;

    BasicTensor<T> x = relu_forward(stem_.forward(batch, mode));
    if (mode == Mode::train) {
        saved_stem_out_ = x;
    }
    for (auto& stage : stages_) {
        for (auto& block : stage) {
            x = block.forward(x, mode, residual_enabled);
        }
    }
    BasicTensor<T> pooled = global_avg_pool3d_forward(x);
    if (mode == Mode::train) {
        saved_pool_input_shape_ = x.shape();
        saved_pooled_ = pooled;
        ready_for_backward_ = true;
    }
    return linear_forward(pooled, head_);
}

template <typename T>
void BasicModel<T>::backward(const BasicTensor<T>& logits_grad) {
    if (!ready_for_backward_) {
        throw StateError("model backward requires a preceding train-mode forward");
    }
    ready_for_backward_ = false;
    LinearGrads<T> hg = linear_backward(logits_grad, saved_pooled_, head_);
    store_grad(head_.weight, hg.weight);
    store_grad(head_.bias, hg.bias);
    BasicTensor<T> g = global_avg_pool3d_backward(hg.input, saved_pool_input_shape_);
    for (std::size_t s = stages_.size(); s-- > 0;) {
        for (std::size_t b = stages_[s].size(); b-- > 0;) {
            g = stages_[s][b].backward(g, residual_enabled);
        }
    }
    g = relu_backward(g, saved_stem_out_);
    stem_.backward(g);
    saved_stem_out_ = BasicTensor<T>();
    saved_pooled_ = BasicTensor<T>();
}

template <typename T>
template <typename Self, typename Fn>
void BasicModel<T>::visit_parameters(Self& self, Fn&& fn) {
    auto conv_bn = [&](const std::string& prefix, const std::string& bn_prefix, auto& unit) {
        fn(prefix + ".weight", unit.conv.weight);
        fn(bn_prefix + ".gamma", unit.bn.gamma);
        fn(bn_prefix + ".beta", unit.bn.beta);
    };
    conv_bn("stem.conv", "stem.bn", self.stem_);
    for (std::size_t s = 0; s < self.stages_.size(); ++s) {
        for (std::size_t b = 0; b < self.stages_[s].size(); ++b) {
            auto& block = self.stages_[s][b];
            const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
            conv_bn(p + "conv1", p + "bn1", block.reduce);
            conv_bn(p + "conv2", p + "bn2", block.grouped);
            conv_bn(p + "conv3", p + "bn3", block.expand);
            if (block.has_projection) {
                conv_bn(p + "proj", p + "proj_bn", block.projection);
            }
        }
    }
    fn(std::string("head.fc.weight"), self.head_.weight);
    fn(std::string("head.fc.bias"), self.head_.bias);
}

template <typename T>
template <typename Self, typename Fn>
void BasicModel<T>::visit_buffers(Self& self, Fn&& fn) {
    auto bn = [&](const std::string& prefix, auto& layer) {
        fn(prefix + ".running_mean", layer.running_mean);
        fn(prefix + ".running_var", layer.running_var);
    };
    bn("stem.bn", self.stem_.bn);
    for (std::size_t s = 0; s < self.stages_.size(); ++s) {
        for (std::size_t b = 0; b < self.stages_[s].size(); ++b) {
            auto& block = self.stages_[s][b];
            const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
            bn(p + "bn1", block.reduce.bn);
            bn(p + "bn2", block.grouped.bn);
            bn(p + "bn3", block.expand.bn);
            if (block.has_projection) {
                bn(p + "proj_bn", block.projection.bn);
            }
        }
    }
}

template <typename T>
std::vector<NamedRef<BasicTensor<T>>> BasicModel<T>::parameters() {
    std::vector<NamedRef<BasicTensor<T>>> out;
    visit_parameters(*this, [&](const std::string& name, BasicTensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
std::vector<NamedRef<const BasicTensor<T>>> BasicModel<T>::parameters() const {
    std::vector<NamedRef<const BasicTensor<T>>> out;
    visit_parameters(*this, [&](const std::string& name, const BasicTensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
std::vector<NamedRef<BasicTensor<T>>> BasicModel<T>::buffers() {
    std::vector<NamedRef<BasicTensor<T>>> out;
    visit_buffers(*this, [&](const std::string& name, BasicTensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
std::vector<NamedRef<const BasicTensor<T>>> BasicModel<T>::buffers() const {
    std::vector<NamedRef<const BasicTensor<T>>> out;
    visit_buffers(*this, [&](const std::string& name, const BasicTensor<T>& t) { out.push_back({name, &t}); });
    return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) {
        n += p.tensor->size();
    }
    return n;
}

template struct ConvBn<float>;
template struct ConvBn<double>;
template struct BottleneckBlock<float>;
template struct BottleneckBlock<double>;
template class BasicModel<float>;
template class BasicModel<double>;

}  // namespace volnet
