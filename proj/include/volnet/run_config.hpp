// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "volnet/loss.hpp"
#include "volnet/optimizer.hpp"
#include "volnet/preprocess.hpp"
#include "volnet/regnet.hpp"
#include "volnet/trainer.hpp"

namespace volnet {

/// Machine form of one training run. JSON schema (every key optional):
///
///   {
///     "architecture": {"stage_depths": [..], "stage_widths": [..], "group_widths": [..],
///                      "bottleneck_ratio": 1.0, "stem_width": 32, "num_classes": 1},
///     "optimizer": {"kind": "adam", "learning_rate": 1e-4, "momentum": 0.9,
///                   "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8, "weight_decay": 0},
///     "loss": {"pos_weight": 1.0},
///     "data": {"train_manifest": "train.csv", "input_size": [64, 128, 128],
///              "train_crop": [56, 112, 112],
///              "crop_fractions": {"depth_low": 0.1, "depth_high": 0.1, "height_low": 0.08,
///                                 "height_high": 0.08, "width_low": 0.08, "width_high": 0.08},
///              "contrast_percentiles": [1, 99], "augment": true, "flip_probability": 0.5},
///     "seed": 0, "epochs": 10, "batch_size": 2, "output_dir": "run"
///   }
///
/// Optimizer fields left out take the defaults of the chosen kind. Relative
/// paths resolve against the config file's directory. Unknown keys are errors.
struct RunConfig {
    RegNetConfig architecture = RegNetConfig::reference();
    OptimizerConfig optimizer;
    LossConfig loss;
    PreprocessConfig preprocess;
    std::filesystem::path train_manifest;
    std::uint64_t seed = 0;
    std::uint64_t epochs = 10;
    std::size_t batch_size = 2;
    std::filesystem::path output_dir = "run";

    /// Throws ConfigError. With `require_inputs` the training manifest must exist.
    void validate(bool require_inputs) const;

    TrainerConfig trainer_config() const;
};

/// Command-line values that replace the corresponding config entries.
struct RunConfigOverrides {
    std::optional<double> learning_rate;
    std::optional<double> pos_weight;
    std::optional<std::string> optimizer;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::string> output_dir;  // relative to the working directory
    std::optional<std::string> train_manifest;
};

/// Throws ConfigError for JSON syntax errors, wrong types and invalid values.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::string& source_name, const RunConfigOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfigOverrides& overrides = {});

/// Fully resolved JSON (absolute paths, every field present), parseable by parse_run_config.
std::string run_config_to_json(const RunConfig& config);

}  // namespace volnet
