// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "volnet/layers.hpp"
#include "volnet/rng.hpp"

namespace volnet {

/// Single-channel scan, voxels row-major over (D, H, W).
struct Volume {
    std::size_t depth = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> voxels;
    std::string source_id;

    Volume() = default;
    Volume(std::size_t d, std::size_t h, std::size_t w, float fill = 0.0f)
        : depth(d), height(h), width(w), voxels(d * h * w, fill) {}

    Extent3 extents() const { return {depth, height, width}; }
    std::size_t size() const { return voxels.size(); }
    std::size_t index(std::size_t d, std::size_t h, std::size_t w) const { return (d * height + h) * width + w; }
    float& at(std::size_t d, std::size_t h, std::size_t w) { return voxels[index(d, h, w)]; }
    float at(std::size_t d, std::size_t h, std::size_t w) const { return voxels[index(d, h, w)]; }
};

/// Fraction of each face to remove. D is the cranio-caudal axis ("top/bottom").
struct CropFractions {
    double depth_low = 0.10;
    double depth_high = 0.10;
    double height_low = 0.08;
    double height_high = 0.08;
    double width_low = 0.08;
    double width_high = 0.08;

    static CropFractions none() { return {0, 0, 0, 0, 0, 0}; }
};

/// Removes floor(fraction * extent) voxels from each face. Fractions must lie
/// in [0, 0.45]; throws DataError if any resulting extent is below 4.
Volume crop_border(const Volume& vol, const CropFractions& fractions);

/// Nearest-rank percentile (p in [0, 100]) of the voxel values.
float percentile_nearest_rank(const std::vector<float>& values, double p);

/// v' = clamp((v - q_low) / (q_high - q_low), 0, 1) with nearest-rank
/// percentiles q. A degenerate range (q_low == q_high) maps every voxel to 0.5.
Volume contrast_stretch(const Volume& vol, double p_low = 1.0, double p_high = 99.0);

/// Trilinear resampling with half-pixel centers: source coordinate
/// (i + 0.5) * in/out - 0.5, clamped to [0, in - 1].
Volume trilinear_resize(const Volume& vol, const Extent3& target);

/// Uniformly placed sub-volume of `size`; offsets drawn for D, H, W in that order.
Volume random_crop(const Volume& vol, const Extent3& size, Rng& rng);

/// Mirror along W.
Volume horizontal_flip(const Volume& vol);

}  // namespace volnet
