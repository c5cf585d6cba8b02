// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "volnet/tensor.hpp"

namespace volnet {

/// Single-logit binary cross-entropy where the positive-class term is scaled
/// by pos_weight (false negatives cost more than false positives).
struct LossConfig {
    double pos_weight = 1.0;

    void validate() const;
};

struct LossValue {
    double loss = 0.0;
    double grad = 0.0;  // d loss / d logit
};

double sigmoid(double z);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// loss = -[w*y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))]
///      =   w*y*softplus(-z)   + (1-y)*softplus(z)
/// Throws NumericError for a non-finite logit, ArgumentError for a label not in {0,1}.
LossValue weighted_bce_with_logit(double logit, int label, double pos_weight);

template <typename T>
struct BatchLoss {
    double mean_loss = 0.0;
    BasicTensor<T> logits_grad;  // gradient of the mean loss, [N, 1]
};

/// Mean over a [N, 1] logit batch.
template <typename T>
BatchLoss<T> weighted_bce_batch(const BasicTensor<T>& logits, std::span<const int> labels,
                                const LossConfig& config);

}  // namespace volnet
