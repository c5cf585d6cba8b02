// SPDX-License-Identifier: Apache-2.0
#include "volnet/loss.hpp"

#include <cmath>
#include <string>

namespace volnet {

void LossConfig::validate() const {
    if (!(pos_weight > 0.0) || !std::isfinite(pos_weight)) {
        throw ConfigError("loss pos_weight must be positive and finite");
    }
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

LossValue weighted_bce_with_logit(double logit, int label, double pos_weight) {
    if (!std::isfinite(logit)) {
        throw NumericError("non-finite logit");
    }
    if (label != 0 && label != 1) {
        throw ArgumentError("label must be 0 or 1, got " + std::to_string(label));
    }
    if (label == 1) {
        return {pos_weight * softplus(-logit), pos_weight * (sigmoid(logit) - 1.0)};
    }
    return {softplus(logit), sigmoid(logit)};
}

template <typename T>
BatchLoss<T> weighted_bce_batch(const BasicTensor<T>& logits, std::span<const int> labels,
                                const LossConfig& config) {
    if (logits.rank() != 2 || logits.extent(1) != 1 || logits.extent(0) != labels.size() || labels.empty()) {
        throw ShapeError("loss expects [N,1] logits with N labels, got " + shape_to_string(logits.shape()) +
                         " and " + std::to_string(labels.size()) + " labels");
    }
    const std::size_t n = labels.size();
    BatchLoss<T> out{0.0, BasicTensor<T>(logits.shape())};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const LossValue v = weighted_bce_with_logit(logits[i], labels[i], config.pos_weight);
        total += v.loss;
        out.logits_grad[i] = static_cast<T>(v.grad / static_cast<double>(n));
    }
    out.mean_loss = total / static_cast<double>(n);
    return out;
}

template BatchLoss<float> weighted_bce_batch(const BasicTensor<float>&, std::span<const int>, const LossConfig&);
template BatchLoss<double> weighted_bce_batch(const BasicTensor<double>&, std::span<const int>, const LossConfig&);

}  // namespace volnet
