// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volnet/tensor.hpp"

namespace volnet {

enum class OptimizerKind : std::uint32_t { sgd = 0, adam = 1, novograd = 2 };

std::string to_string(OptimizerKind kind);
/// Accepts "sgd", "adam", "novograd" and the short form "novo".
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-4;
    double momentum = 0.9;   // sgd
    double beta1 = 0.9;      // adam, novograd
    double beta2 = 0.999;    // adam; novograd uses 0.25
    double epsilon = 1e-8;
    double weight_decay = 0.0;

    /// Defaults for `kind`, including NovoGrad's beta2 = 0.25.
    static OptimizerConfig defaults(OptimizerKind kind, double learning_rate);

    /// learning_rate > 0 (or == 0 for frozen runs), betas and momentum in [0, 1).
    void validate() const;

    bool operator==(const OptimizerConfig&) const = default;
};

/// Per-parameter slots. SGD: first = velocity. Adam: first = m, second = v.
/// NovoGrad: first = m, second = per-tensor scalar v (shape []).
template <typename T>
struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<BasicTensor<T>> first;
    std::vector<BasicTensor<T>> second;
};

/// Each step reads the gradient buffer of every parameter. All gradients are
/// checked for NaN/Inf before anything is modified (NumericError). Empty state
/// is zero-initialized on the first call.
template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state, const OptimizerConfig& config);

template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state, const OptimizerConfig& config);

/// Layer-wise normalized momentum; one "layer" is one parameter tensor.
///   v <- b2*v + (1-b2)*|g|^2   (v <- |g|^2 on the first step)
///   m <- b1*m + g/(sqrt(v)+eps) + wd*p
///   p <- p - lr*m
template <typename T>
void novograd_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state,
                   const OptimizerConfig& config);

template <typename T>
void optimizer_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state,
                    const OptimizerConfig& config);

}  // namespace volnet
