// SPDX-License-Identifier: Apache-2.0
#include "volnet/preprocess.hpp"

#include <algorithm>

namespace volnet {

void PreprocessConfig::validate() const {
    if (!(contrast_low >= 0.0 && contrast_low < contrast_high && contrast_high <= 100.0)) {
        throw ConfigError("contrast percentiles must satisfy 0 <= low < high <= 100");
    }
    for (std::size_t a = 0; a < 3; ++a) {
        if (input_size[a] == 0) {
            throw ConfigError("input_size extents must be >= 1");
        }
        if (train_crop[a] == 0 || train_crop[a] > input_size[a]) {
            throw ConfigError("train_crop must fit inside input_size");
        }
    }
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        throw ConfigError("flip_probability must lie in [0, 1]");
    }
}

Tensor preprocess_volume(const Volume& vol, const PreprocessConfig& config, Mode mode, Rng* rng) {
    Volume v = crop_border(vol, config.crop);
    v = contrast_stretch(v, config.contrast_low, config.contrast_high);
    v = trilinear_resize(v, config.input_size);
    if (mode == Mode::train && config.augment) {
        if (rng == nullptr) {
            throw ArgumentError("train-mode augmentation needs a random generator");
        }
        v = random_crop(v, config.train_crop, *rng);
        v = trilinear_resize(v, config.input_size);
        if (rng->uniform() < config.flip_probability) {
            v = horizontal_flip(v);
        }
    }
    return Tensor({1, v.depth, v.height, v.width}, std::move(v.voxels));
}

}  // namespace volnet
