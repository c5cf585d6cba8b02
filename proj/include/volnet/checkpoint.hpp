// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "volnet/errors.hpp"
#include "volnet/optimizer.hpp"
#include "volnet/regnet.hpp"
#include "volnet/tensor.hpp"

namespace volnet {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
    RegNetConfig architecture;
    OptimizerConfig optimizer;
    std::uint64_t optimizer_step = 0;
    std::uint64_t epoch = 0;
    std::uint64_t rng_state = 0;
    std::vector<NamedTensor> parameters;
    std::vector<NamedTensor> buffers;            // BN running statistics
    std::vector<NamedTensor> optimizer_first;    // velocity / first moment, per parameter
    std::vector<NamedTensor> optimizer_second;   // second moment, per parameter (absent for SGD)
};

enum class CheckpointErrc { io, bad_magic, version_mismatch, truncated, malformed };

class CheckpointError : public Error {
public:
    CheckpointError(CheckpointErrc code, const std::string& what) : Error(what), code_(code) {}
    CheckpointErrc code() const { return code_; }

private:
    CheckpointErrc code_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout:
///   "VNT1", u32 version
///   architecture: u32 stages, u32 depths[], u32 widths[], u32 group widths[],
///                 f64 bottleneck ratio, u32 stem width, u32 classes, u32 input channels
///   optimizer:    u32 kind, f64 lr, momentum, beta1, beta2, epsilon, weight decay, u64 step
///   u64 epoch, u64 rng state
///   four tensor sections (parameters, buffers, optimizer first, optimizer second):
///     u32 count, then per tensor: u32 name length, UTF-8 name, u32 rank,
///     u32 extents[rank], f32 payload
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a model plus optimizer and loop state.
Checkpoint make_checkpoint(const Model& model, const OptimizerConfig& optimizer, const OptimizerState<float>& state,
                           std::uint64_t epoch, std::uint64_t rng_state);

/// Rebuilds the model from the stored architecture and copies every tensor in
/// by name. Throws CheckpointError(malformed) on missing names or shape mismatch.
Model restore_model(const Checkpoint& ckpt);
OptimizerState<float> restore_optimizer_state(const Checkpoint& ckpt, const Model& model);

}  // namespace volnet
