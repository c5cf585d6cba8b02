// SPDX-License-Identifier: Apache-2.0
#include "volnet/volume.hpp"

#include <algorithm>
#include <cmath>

#include "volnet/errors.hpp"

namespace volnet {

namespace {

Volume copy_box(const Volume& vol, const Extent3& offset, const Extent3& size) {
    Volume out(size[0], size[1], size[2]);
    out.source_id = vol.source_id;
    for (std::size_t d = 0; d < size[0]; ++d) {
        for (std::size_t h = 0; h < size[1]; ++h) {
            const float* src = vol.voxels.data() + vol.index(d + offset[0], h + offset[1], offset[2]);
            std::copy_n(src, size[2], out.voxels.data() + out.index(d, h, 0));
        }
    }
    return out;
}

}  // namespace

Volume crop_border(const Volume& vol, const CropFractions& f) {
    const double fr[3][2] = {{f.depth_low, f.depth_high}, {f.height_low, f.height_high}, {f.width_low, f.width_high}};
    const Extent3 ext = vol.extents();
    Extent3 offset{};
    Extent3 size{};
    for (std::size_t a = 0; a < 3; ++a) {
        for (double x : fr[a]) {
            if (!(x >= 0.0 && x <= 0.45)) {
                throw DataError("crop fraction " + std::to_string(x) + " outside [0, 0.45]");
            }
        }
        const auto lo = static_cast<std::size_t>(std::floor(fr[a][0] * static_cast<double>(ext[a])));
        const auto hi = static_cast<std::size_t>(std::floor(fr[a][1] * static_cast<double>(ext[a])));
        if (lo + hi + 4 > ext[a]) {
            throw DataError("crop leaves axis " + std::to_string(a) + " with fewer than 4 voxels (extent " +
                            std::to_string(ext[a]) + ")");
        }
        offset[a] = lo;
        size[a] = ext[a] - lo - hi;
    }
    return copy_box(vol, offset, size);
}

float percentile_nearest_rank(const std::vector<float>& values, double p) {
    if (values.empty()) {
        throw DataError("percentile of an empty volume");
    }
    if (!(p >= 0.0 && p <= 100.0)) {
        throw ArgumentError("percentile must lie in [0, 100]");
    }
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    std::vector<float> tmp(values);
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(rank - 1), tmp.end());
    return tmp[rank - 1];
}

Volume contrast_stretch(const Volume& vol, double p_low, double p_high) {
    if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0)) {
        throw ArgumentError("contrast_stretch needs 0 <= p_low < p_high <= 100");
    }
    const double q_low = percentile_nearest_rank(vol.voxels, p_low);
    const double q_high = percentile_nearest_rank(vol.voxels, p_high);
    Volume out = vol;
    if (q_low == q_high) {
        std::fill(out.voxels.begin(), out.voxels.end(), 0.5f);
        return out;
    }
    const double range = q_high - q_low;
    for (float& v : out.voxels) {
        v = static_cast<float>(std::clamp((static_cast<double>(v) - q_low) / range, 0.0, 1.0));
    }
    return out;
}

namespace {

struct Lerp {
    std::size_t i0;
    std::size_t i1;
    double frac;
};

std::vector<Lerp> axis_weights(std::size_t in, std::size_t out) {
    std::vector<Lerp> w(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double top = static_cast<double>(in - 1);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, top);
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        w[i] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return w;
}

}  // namespace

Volume trilinear_resize(const Volume& vol, const Extent3& target) {
    for (std::size_t a = 0; a < 3; ++a) {
        if (target[a] == 0) {
            throw ArgumentError("resize target extents must be >= 1");
        }
        if (vol.extents()[a] == 0) {
            throw DataError("cannot resize an empty volume");
        }
    }
    const auto wd = axis_weights(vol.depth, target[0]);
    const auto wh = axis_weights(vol.height, target[1]);
    const auto ww = axis_weights(vol.width, target[2]);
    Volume out(target[0], target[1], target[2]);
    out.source_id = vol.source_id;
    for (std::size_t d = 0; d < target[0]; ++d) {
        for (std::size_t h = 0; h < target[1]; ++h) {
            for (std::size_t w = 0; w < target[2]; ++w) {
                auto v = [&](std::size_t dd, std::size_t hh, std::size_t ww_) {
                    return static_cast<double>(vol.at(dd, hh, ww_));
                };
                const Lerp& a = wd[d];
                const Lerp& b = wh[h];
                const Lerp& c = ww[w];
                const double c00 = v(a.i0, b.i0, c.i0) + (v(a.i0, b.i0, c.i1) - v(a.i0, b.i0, c.i0)) * c.frac;
                const double c01 = v(a.i0, b.i1, c.i0) + (v(a.i0, b.i1, c.i1) - v(a.i0, b.i1, c.i0)) * c.frac;
                const double c10 = v(a.i1, b.i0, c.i0) + (v(a.i1, b.i0, c.i1) - v(a.i1, b.i0, c.i0)) * c.frac;
                const double c11 = v(a.i1, b.i1, c.i0) + (v(a.i1, b.i1, c.i1) - v(a.i1, b.i1, c.i0)) * c.frac;
                const double c0 = c00 + (c01 - c00) * b.frac;
                const double c1 = c10 + (c11 - c10) * b.frac;
                out.at(d, h, w) = static_cast<float>(c0 + (c1 - c0) * a.frac);
            }
        }
    }
    return out;
}

Volume random_crop(const Volume& vol, const Extent3& size, Rng& rng) {
    const Extent3 ext = vol.extents();
    Extent3 offset{};
    for (std::size_t a = 0; a < 3; ++a) {
        if (size[a] == 0 || size[a] > ext[a]) {
            throw DataError("random crop size " + std::to_string(size[a]) + " does not fit axis " +
                            std::to_string(a) + " of extent " + std::to_string(ext[a]));
        }
    }
    for (std::size_t a = 0; a < 3; ++a) {
        offset[a] = static_cast<std::size_t>(rng.uniform_int(ext[a] - size[a] + 1));
    }
    return copy_box(vol, offset, size);
}

Volume horizontal_flip(const Volume& vol) {
    Volume out = vol;
    for (std::size_t d = 0; d < vol.depth; ++d) {
        for (std::size_t h = 0; h < vol.height; ++h) {
            float* row = out.voxels.data() + out.index(d, h, 0);
            std::reverse(row, row + vol.width);
        }
    }
    return out;
}

}  // namespace volnet
