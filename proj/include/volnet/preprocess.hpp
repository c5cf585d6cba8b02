// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "volnet/layers.hpp"
#include "volnet/rng.hpp"
#include "volnet/tensor.hpp"
#include "volnet/volume.hpp"

namespace volnet {

struct PreprocessConfig {
    CropFractions crop;
    double contrast_low = 1.0;
    double contrast_high = 99.0;
    Extent3 input_size{64, 128, 128};   // D, H, W
    Extent3 train_crop{56, 112, 112};
    bool augment = true;
    double flip_probability = 0.5;

    void validate() const;
};

/// crop_border -> contrast_stretch -> trilinear_resize, then in train mode with
/// augmentation on: random_crop(train_crop) -> resize back to input_size ->
/// horizontal_flip with flip_probability. Returns [1, D, H, W].
/// Eval mode never touches `rng` (which may then be null).
Tensor preprocess_volume(const Volume& vol, const PreprocessConfig& config, Mode mode, Rng* rng);

}  // namespace volnet
