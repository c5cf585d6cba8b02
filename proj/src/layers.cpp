// SPDX-License-Identifier: Apache-2.0
#include "volnet/layers.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "volnet/parallel.hpp"

namespace volnet {

namespace {

using Index = std::int64_t;

// Output positions o in [lo, hi) whose tap o*s + k - p lands inside [0, in_extent).
struct TapRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

TapRange tap_range(std::size_t out_extent, std::size_t in_extent, std::size_t k, std::size_t s,
                   std::size_t p) {
    const Index shift = static_cast<Index>(k) - static_cast<Index>(p);
    const Index stride = static_cast<Index>(s);
    // smallest o with o*s + shift >= 0
    Index lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    // largest o with o*s + shift <= in - 1
    const Index top = static_cast<Index>(in_extent) - 1 - shift;
    Index hi = top < 0 ? 0 : top / stride + 1;
    lo = std::min<Index>(lo, static_cast<Index>(out_extent));
    hi = std::clamp<Index>(hi, lo, static_cast<Index>(out_extent));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Input coordinate of output o for tap k; only valid inside the TapRange.
inline std::size_t tap_coord(std::size_t o, std::size_t k, std::size_t s, std::size_t p) {
    return o * s + k - p;
}

template <typename T>
void require_rank5(const BasicTensor<T>& t, const char* what) {
    if (t.rank() != 5) {
        throw ShapeError(std::string(what) + ": expected a 5-D [N,C,D,H,W] tensor, got " +
                         shape_to_string(t.shape()));
    }
}

// Everything the convolution kernels need, resolved once per call.
struct ConvGeometry {
    std::size_t n, cin, cout, groups, cin_g, cout_g;
    std::size_t d, h, w;
    std::size_t od, oh, ow;
    Extent3 k, s, p;

    std::size_t in_volume() const { return d * h * w; }
    std::size_t out_volume() const { return od * oh * ow; }
    std::size_t taps() const { return k[0] * k[1] * k[2]; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const Conv3dLayer<T>& layer) {
    layer.validate();
    require_rank5(input, "conv3d");
    const Shape& in = input.shape();
    if (in[1] != layer.in_channels()) {
        throw ShapeError("conv3d: input has " + std::to_string(in[1]) + " channels, layer expects " +
                         std::to_string(layer.in_channels()));
    }
    const Shape out = conv3d_output_shape(in, layer.out_channels(), layer.kernel(), layer.stride,
                                          layer.padding);
    ConvGeometry g{};
    g.n = in[0];
    g.cin = in[1];
    g.cout = layer.out_channels();
    g.groups = layer.groups;
    g.cin_g = g.cin / g.groups;
    g.cout_g = g.cout / g.groups;
    g.d = in[2];
    g.h = in[3];
    g.w = in[4];
    g.od = out[2];
    g.oh = out[3];
    g.ow = out[4];
    g.k = layer.kernel();
    g.s = layer.stride;
    g.p = layer.padding;
    return g;
}

}  // namespace

template <typename T>
void Conv3dLayer<T>::validate() const {
    if (weight.rank() != 5) {
        throw ShapeError("conv3d: weight must be [C_out, C_in/g, kD, kH, kW], got " +
                         shape_to_string(weight.shape()));
    }
    if (groups == 0 || out_channels() % groups != 0) {
        throw ShapeError("conv3d: " + std::to_string(out_channels()) + " output channels not divisible by " +
                         std::to_string(groups) + " groups");
    }
    for (std::size_t i = 2; i < 5; ++i) {
        if (weight.extent(i) == 0) {
            throw ShapeError("conv3d: kernel extents must be >= 1");
        }
    }
    for (std::size_t s : stride) {
        if (s == 0) {
            throw ShapeError("conv3d: stride must be >= 1");
        }
    }
    if (bias && bias->shape() != Shape{out_channels()}) {
        throw ShapeError("conv3d: bias must be [C_out]");
    }
}

Shape conv3d_output_shape(const Shape& input_shape, std::size_t out_channels, const Extent3& kernel,
                          const Extent3& stride, const Extent3& padding) {
    if (input_shape.size() != 5) {
        throw ShapeError("conv3d: expected a 5-D input, got " + shape_to_string(input_shape));
    }
    Shape out{input_shape[0], out_channels, 0, 0, 0};
    for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t padded = input_shape[2 + a] + 2 * padding[a];
        if (padded < kernel[a]) {
            throw ShapeError("conv3d: axis " + std::to_string(a) + " extent " +
                             std::to_string(input_shape[2 + a]) + " with padding " + std::to_string(padding[a]) +
                             " is smaller than kernel " + std::to_string(kernel[a]));
        }
        out[2 + a] = (padded - kernel[a]) / stride[a] + 1;
    }
    return out;
}

template <typename T>
BasicTensor<T> conv3d_forward(const BasicTensor<T>& input, const Conv3dLayer<T>& layer) {
    const ConvGeometry g = conv_geometry(input, layer);
    BasicTensor<T> output({g.n, g.cout, g.od, g.oh, g.ow});

    const T* in = input.raw();
    const T* wt = layer.weight.raw();
    T* out = output.raw();

    parallel_for(g.n * g.cout, [&](std::size_t job) {
        const std::size_t n = job / g.cout;
        const std::size_t co = job % g.cout;
        const std::size_t group = co / g.cout_g;
        const double init = layer.bias ? static_cast<double>((*layer.bias)[co]) : 0.0;
        std::vector<double> acc(g.out_volume(), init);

        for (std::size_t kd = 0; kd < g.k[0]; ++kd) {
            const TapRange rd = tap_range(g.od, g.d, kd, g.s[0], g.p[0]);
            for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
                const TapRange rh = tap_range(g.oh, g.h, kh, g.s[1], g.p[1]);
                for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
                    const TapRange rw = tap_range(g.ow, g.w, kw, g.s[2], g.p[2]);
                    if (rw.lo >= rw.hi) {
                        continue;
                    }
                    for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
                        const double wv = static_cast<double>(
                            wt[(((co * g.cin_g + ci) * g.k[0] + kd) * g.k[1] + kh) * g.k[2] + kw]);
                        const T* plane = in + (n * g.cin + group * g.cin_g + ci) * g.in_volume();
                        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
                            const std::size_t id = tap_coord(od, kd, g.s[0], g.p[0]);
                            for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const std::size_t ih = tap_coord(oh, kh, g.s[1], g.p[1]);
                                const T* row = plane + (id * g.h + ih) * g.w;
                                double* arow = acc.data() + (od * g.oh + oh) * g.ow;
                                const std::size_t sw = g.s[2];
                                const std::size_t off = kw - g.p[2];  // wraps, but o*sw + off is in range
                                if (sw == 1) {
                                    const T* r = row + static_cast<std::ptrdiff_t>(off);
                                    for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                        arow[ow] += wv * static_cast<double>(r[ow]);
                                    }
                                } else {
                                    for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                        arow[ow] += wv * static_cast<double>(row[ow * sw + off]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        T* dst = out + job * g.out_volume();
        for (std::size_t i = 0; i < acc.size(); ++i) {
            dst[i] = static_cast<T>(acc[i]);
        }
    });
    return output;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const Conv3dLayer<T>& layer) {
    const ConvGeometry g = conv_geometry(input, layer);
    const Shape expected{g.n, g.cout, g.od, g.oh, g.ow};
    if (grad_out.shape() != expected) {
        throw ShapeError("conv3d_backward: grad_out " + shape_to_string(grad_out.shape()) +
                         " does not match forward output " + shape_to_string(expected));
    }

    Conv3dGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(layer.weight.shape()), std::nullopt};
    const T* in = input.raw();
    const T* gout = grad_out.raw();
    const T* wt = layer.weight.raw();

    // Weight (and bias) gradient: one job per output channel.
    T* gw = grads.weight.raw();
    std::vector<double> bias_sum(g.cout, 0.0);
    parallel_for(g.cout, [&](std::size_t co) {
        const std::size_t group = co / g.cout_g;
        double bsum = 0.0;
        for (std::size_t n = 0; n < g.n; ++n) {
            const T* go = gout + (n * g.cout + co) * g.out_volume();
            for (std::size_t i = 0; i < g.out_volume(); ++i) {
                bsum += static_cast<double>(go[i]);
            }
        }
        bias_sum[co] = bsum;

        for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
            for (std::size_t kd = 0; kd < g.k[0]; ++kd) {
                const TapRange rd = tap_range(g.od, g.d, kd, g.s[0], g.p[0]);
                for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
                    const TapRange rh = tap_range(g.oh, g.h, kh, g.s[1], g.p[1]);
                    for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
                        const TapRange rw = tap_range(g.ow, g.w, kw, g.s[2], g.p[2]);
                        const std::size_t sw = g.s[2];
                        const std::size_t off = kw - g.p[2];
                        double total = 0.0;
                        for (std::size_t n = 0; n < g.n; ++n) {
                            const T* plane = in + (n * g.cin + group * g.cin_g + ci) * g.in_volume();
                            const T* go = gout + (n * g.cout + co) * g.out_volume();
                            for (std::size_t od = rd.lo; od < rd.hi; ++od) {
                                const std::size_t id = tap_coord(od, kd, g.s[0], g.p[0]);
                                for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
                                    const std::size_t ih = tap_coord(oh, kh, g.s[1], g.p[1]);
                                    const T* row = plane + (id * g.h + ih) * g.w;
                                    const T* grow = go + (od * g.oh + oh) * g.ow;
                                    // Four interleaved partial sums, combined in a fixed order.
                                    double part[4] = {0.0, 0.0, 0.0, 0.0};
                                    std::size_t ow = rw.lo;
                                    for (; ow + 4 <= rw.hi; ow += 4) {
                                        for (std::size_t l = 0; l < 4; ++l) {
                                            part[l] += static_cast<double>(grow[ow + l]) *
                                                       static_cast<double>(row[(ow + l) * sw + off]);
                                        }
                                    }
                                    for (std::size_t l = 0; ow < rw.hi; ++ow, ++l) {
                                        part[l] += static_cast<double>(grow[ow]) *
                                                   static_cast<double>(row[ow * sw + off]);
                                    }
                                    total += (part[0] + part[1]) + (part[2] + part[3]);
                                }
                            }
                        }
                        gw[(((co * g.cin_g + ci) * g.k[0] + kd) * g.k[1] + kh) * g.k[2] + kw] =
                            static_cast<T>(total);
                    }
                }
            }
        }
    });
    if (layer.bias) {
        BasicTensor<T> gb({g.cout});
        for (std::size_t co = 0; co < g.cout; ++co) {
            gb[co] = static_cast<T>(bias_sum[co]);
        }
        grads.bias = std::move(gb);
    }

    // Input gradient: one job per (n, group); scatter through the transposed taps.
    T* gin = grads.input.raw();
    parallel_for(g.n * g.groups, [&](std::size_t job) {
        const std::size_t n = job / g.groups;
        const std::size_t group = job % g.groups;
        std::vector<double> acc(g.cin_g * g.in_volume(), 0.0);
        for (std::size_t cog = 0; cog < g.cout_g; ++cog) {
            const std::size_t co = group * g.cout_g + cog;
            const T* go = gout + (n * g.cout + co) * g.out_volume();
            for (std::size_t kd = 0; kd < g.k[0]; ++kd) {
                const TapRange rd = tap_range(g.od, g.d, kd, g.s[0], g.p[0]);
                for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
                    const TapRange rh = tap_range(g.oh, g.h, kh, g.s[1], g.p[1]);
                    for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
                        const TapRange rw = tap_range(g.ow, g.w, kw, g.s[2], g.p[2]);
                        if (rw.lo >= rw.hi) {
                            continue;
                        }
                        const std::size_t sw = g.s[2];
                        const std::size_t off = kw - g.p[2];
                        for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
                            const double wv = static_cast<double>(
                                wt[(((co * g.cin_g + ci) * g.k[0] + kd) * g.k[1] + kh) * g.k[2] + kw]);
                            double* plane = acc.data() + ci * g.in_volume();
                            for (std::size_t od = rd.lo; od < rd.hi; ++od) {
                                const std::size_t id = tap_coord(od, kd, g.s[0], g.p[0]);
                                for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
                                    const std::size_t ih = tap_coord(oh, kh, g.s[1], g.p[1]);
                                    double* row = plane + (id * g.h + ih) * g.w;
                                    const T* grow = go + (od * g.oh + oh) * g.ow;
                                    if (sw == 1) {
                                        double* r = row + static_cast<std::ptrdiff_t>(off);
                                        for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                            r[ow] += wv * static_cast<double>(grow[ow]);
                                        }
                                    } else {
                                        for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                            row[ow * sw + off] += wv * static_cast<double>(grow[ow]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        T* dst = gin + (n * g.cin + group * g.cin_g) * g.in_volume();
        for (std::size_t i = 0; i < acc.size(); ++i) {
            dst[i] = static_cast<T>(acc[i]);
        }
    });
    return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm3dLayer<T> BatchNorm3dLayer<T>::make(std::size_t channels) {
    BatchNorm3dLayer layer;
    layer.gamma = BasicTensor<T>({channels}, T{1});
    layer.beta = BasicTensor<T>({channels}, T{0});
    layer.running_mean = BasicTensor<T>({channels}, T{0});
    layer.running_var = BasicTensor<T>({channels}, T{1});
    return layer;
}

template <typename T>
BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>& input, BatchNorm3dLayer<T>& layer,
                                   BatchNormCache<T>* cache) {
    require_rank5(input, "batchnorm3d");
    const std::size_t n = input.extent(0);
    const std::size_t c = input.extent(1);
    if (c != layer.channels()) {
        throw ShapeError("batchnorm3d: input has " + std::to_string(c) + " channels, layer has " +
                         std::to_string(layer.channels()));
    }
    if (!(layer.epsilon > 0.0)) {
        throw ConfigError("batchnorm3d: epsilon must be positive");
    }
    const std::size_t vol = input.extent(2) * input.extent(3) * input.extent(4);
    const std::size_t count = n * vol;

    BasicTensor<T> output(input.shape());
    const T* x = input.raw();
    T* y = output.raw();

    if (layer.mode == Mode::eval) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double mean = layer.running_mean[ch];
            const double inv_std = 1.0 / std::sqrt(static_cast<double>(layer.running_var[ch]) + layer.epsilon);
            const double gamma = layer.gamma[ch];
            const double beta = layer.beta[ch];
            for (std::size_t b = 0; b < n; ++b) {
                const std::size_t base = (b * c + ch) * vol;
                for (std::size_t i = 0; i < vol; ++i) {
                    y[base + i] = static_cast<T>(gamma * ((x[base + i] - mean) * inv_std) + beta);
                }
            }
        }
        return output;
    }

    if (count < 2) {
        throw DegenerateError("batchnorm3d: train mode needs at least 2 values per channel, got " +
                              std::to_string(count));
    }
    if (cache) {
        cache->normalized = BasicTensor<T>(input.shape());
        cache->inv_std.assign(c, 0.0);
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const T* px = x + (b * c + ch) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                sum += px[i];
            }
        }
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const T* px = x + (b * c + ch) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                const double dv = px[i] - mean;
                sq += dv * dv;
            }
        }
        const double var = sq / static_cast<double>(count);
        const double inv_std = 1.0 / std::sqrt(var + layer.epsilon);
        const double gamma = layer.gamma[ch];
        const double beta = layer.beta[ch];
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                const double xh = (x[base + i] - mean) * inv_std;
                if (cache) {
                    cache->normalized[base + i] = static_cast<T>(xh);
                }
                y[base + i] = static_cast<T>(gamma * xh + beta);
            }
        }
        if (cache) {
            cache->inv_std[ch] = inv_std;
        }
        const double m = layer.momentum;
        const double unbiased = sq / static_cast<double>(count - 1);
        layer.running_mean[ch] = static_cast<T>((1.0 - m) * layer.running_mean[ch] + m * mean);
        layer.running_var[ch] = static_cast<T>((1.0 - m) * layer.running_var[ch] + m * unbiased);
    }
    return output;
}

template <typename T>
BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>& grad_out, const BatchNormCache<T>& cache,
                                       const BatchNorm3dLayer<T>& layer) {
    if (layer.mode != Mode::train) {
        throw StateError("batchnorm3d_backward: layer is in eval mode");
    }
    if (grad_out.shape() != cache.normalized.shape()) {
        throw ShapeError("batchnorm3d_backward: grad_out " + shape_to_string(grad_out.shape()) +
                         " does not match saved activations " + shape_to_string(cache.normalized.shape()));
    }
    require_rank5(grad_out, "batchnorm3d_backward");
    const std::size_t n = grad_out.extent(0);
    const std::size_t c = grad_out.extent(1);
    const std::size_t vol = grad_out.extent(2) * grad_out.extent(3) * grad_out.extent(4);
    const double count = static_cast<double>(n * vol);

    BatchNormGrads<T> grads{BasicTensor<T>(grad_out.shape()), BasicTensor<T>({c}), BasicTensor<T>({c})};
    const T* dy = grad_out.raw();
    const T* xh = cache.normalized.raw();
    T* dx = grads.input.raw();

    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                sum_dy += dy[base + i];
                sum_dy_xh += static_cast<double>(dy[base + i]) * xh[base + i];
            }
        }
        grads.gamma[ch] = static_cast<T>(sum_dy_xh);
        grads.beta[ch] = static_cast<T>(sum_dy);
        // dx = gamma * inv_std / M * (M*dy - sum(dy) - x_hat * sum(dy * x_hat))
        const double k = static_cast<double>(layer.gamma[ch]) * cache.inv_std[ch] / count;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                dx[base + i] = static_cast<T>(k * (count * dy[base + i] - sum_dy - xh[base + i] * sum_dy_xh));
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > T{0} ? input[i] : T{0};
    }
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input) {
    if (grad_out.shape() != input.shape()) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    BasicTensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > T{0} ? grad_out[i] : T{0};
    }
    return out;
}

template <typename T>
BasicTensor<T> global_avg_pool3d_forward(const BasicTensor<T>& input) {
    require_rank5(input, "global_avg_pool3d");
    const std::size_t nc = input.extent(0) * input.extent(1);
    const std::size_t vol = input.extent(2) * input.extent(3) * input.extent(4);
    if (vol == 0) {
        throw ShapeError("global_avg_pool3d: empty spatial extent");
    }
    BasicTensor<T> out({input.extent(0), input.extent(1)});
    for (std::size_t j = 0; j < nc; ++j) {
        double sum = 0.0;
        const T* p = input.raw() + j * vol;
        for (std::size_t i = 0; i < vol; ++i) {
            sum += p[i];
        }
        out[j] = static_cast<T>(sum / static_cast<double>(vol));
    }
    return out;
}

template <typename T>
BasicTensor<T> global_avg_pool3d_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
    if (input_shape.size() != 5 || grad_out.shape() != Shape{input_shape[0], input_shape[1]}) {
        throw ShapeError("global_avg_pool3d_backward: grad_out " + shape_to_string(grad_out.shape()) +
                         " incompatible with input " + shape_to_string(input_shape));
    }
    const std::size_t vol = input_shape[2] * input_shape[3] * input_shape[4];
    BasicTensor<T> out(input_shape);
    for (std::size_t j = 0; j < grad_out.size(); ++j) {
        const T v = static_cast<T>(static_cast<double>(grad_out[j]) / static_cast<double>(vol));
        std::fill_n(out.raw() + j * vol, vol, v);
    }
    return out;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const LinearLayer<T>& layer) {
    if (input.rank() != 2 || input.extent(1) != layer.in_features() ||
        layer.bias.shape() != Shape{layer.out_features()}) {
        throw ShapeError("linear: input " + shape_to_string(input.shape()) + " vs weight " +
                         shape_to_string(layer.weight.shape()));
    }
    const std::size_t n = input.extent(0);
    const std::size_t fin = layer.in_features();
    const std::size_t fout = layer.out_features();
    BasicTensor<T> out({n, fout});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t o = 0; o < fout; ++o) {
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < fin; ++i) {
                acc += static_cast<double>(layer.weight[o * fin + i]) * input[b * fin + i];
            }
            out[b * fout + o] = static_cast<T>(acc);
        }
    }
    return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& input,
                               const LinearLayer<T>& layer) {
    if (input.rank() != 2 || input.extent(1) != layer.in_features()) {
        throw ShapeError("linear_backward: input " + shape_to_string(input.shape()) + " vs weight " +
                         shape_to_string(layer.weight.shape()));
    }
    const std::size_t n = input.extent(0);
    const std::size_t fin = layer.in_features();
    const std::size_t fout = layer.out_features();
    if (grad_out.shape() != Shape{n, fout}) {
        throw ShapeError("linear_backward: grad_out " + shape_to_string(grad_out.shape()) + " expected " +
                         shape_to_string({n, fout}));
    }
    LinearGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(layer.weight.shape()),
                         BasicTensor<T>({fout})};
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < fin; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < fout; ++o) {
                acc += static_cast<double>(layer.weight[o * fin + i]) * grad_out[b * fout + o];
            }
            grads.input[b * fin + i] = static_cast<T>(acc);
        }
    }
    for (std::size_t o = 0; o < fout; ++o) {
        double bsum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            bsum += grad_out[b * fout + o];
        }
        grads.bias[o] = static_cast<T>(bsum);
        for (std::size_t i = 0; i < fin; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                acc += static_cast<double>(grad_out[b * fout + o]) * input[b * fin + i];
            }
            grads.weight[o * fin + i] = static_cast<T>(acc);
        }
    }
    return grads;
}

#define VOLNET_INSTANTIATE_LAYERS(T)                                                                          \
    template struct Conv3dLayer<T>;                                                                           \
    template struct BatchNorm3dLayer<T>;                                                                      \
    template BasicTensor<T> conv3d_forward(const BasicTensor<T>&, const Conv3dLayer<T>&);                     \
    template Conv3dGrads<T> conv3d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                            const Conv3dLayer<T>&);                                           \
    template BasicTensor<T> batchnorm3d_forward(const BasicTensor<T>&, BatchNorm3dLayer<T>&,                  \
                                                BatchNormCache<T>*);                                          \
    template BatchNormGrads<T> batchnorm3d_backward(const BasicTensor<T>&, const BatchNormCache<T>&,          \
                                                    const BatchNorm3dLayer<T>&);                              \
    template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                              \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
    template BasicTensor<T> global_avg_pool3d_forward(const BasicTensor<T>&);                                 \
    template BasicTensor<T> global_avg_pool3d_backward(const BasicTensor<T>&, const Shape&);                  \
    template BasicTensor<T> linear_forward(const BasicTensor<T>&, const LinearLayer<T>&);                     \
    template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&, const LinearLayer<T>&);

VOLNET_INSTANTIATE_LAYERS(float)
VOLNET_INSTANTIATE_LAYERS(double)

#undef VOLNET_INSTANTIATE_LAYERS

}  // namespace volnet
