// SPDX-License-Identifier: Apache-2.0
#include "volnet/optimizer.hpp"

#include <cmath>

namespace volnet {

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::novograd: return "novograd";
    }
    return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "sgd" || name == "SGD") return OptimizerKind::sgd;
    if (name == "adam" || name == "Adam") return OptimizerKind::adam;
    if (name == "novograd" || name == "novo" || name == "Novo" || name == "NovoGrad") return OptimizerKind::novograd;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd, adam or novograd)");
}

OptimizerConfig OptimizerConfig::defaults(OptimizerKind kind, double learning_rate) {
    OptimizerConfig c;
    c.kind = kind;
    c.learning_rate = learning_rate;
    if (kind == OptimizerKind::novograd) {
        c.beta2 = 0.25;
    }
    return c;
}

void OptimizerConfig::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and >= 0");
    }
    if (!unit(momentum) || !unit(beta1) || !unit(beta2)) {
        throw ConfigError("momentum and betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("epsilon must be > 0 and weight_decay >= 0");
    }
}

namespace {

template <typename T>
void check_and_prepare(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state, bool scalar_second,
                       bool needs_second) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (T g : params[i]->grad()) {
            if (!std::isfinite(static_cast<double>(g))) {
                throw NumericError("non-finite gradient in parameter tensor " + std::to_string(i));
            }
        }
    }
    if (state.first.empty()) {
        for (auto* p : params) {
            state.first.emplace_back(p->shape());
            if (needs_second) {
                state.second.push_back(scalar_second ? BasicTensor<T>() : BasicTensor<T>(p->shape()));
            }
        }
    }
    if (state.first.size() != params.size() || (needs_second && state.second.size() != params.size())) {
        throw StateError("optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first[i].shape() != params[i]->shape()) {
            throw StateError("optimizer state shape mismatch for parameter tensor " + std::to_string(i));
        }
    }
}

}  // namespace

template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state, const OptimizerConfig& config) {
    check_and_prepare(params, state, false, false);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto g = params[i]->grad();
        auto v = state.first[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double grad = static_cast<double>(g[j]) + config.weight_decay * p[j];
            const double vel = config.momentum * v[j] + grad;
            v[j] = static_cast<T>(vel);
            p[j] = static_cast<T>(p[j] - config.learning_rate * vel);
        }
    }
    ++state.step;
}

template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state, const OptimizerConfig& config) {
    check_and_prepare(params, state, false, true);
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto g = params[i]->grad();
        auto m = state.first[i].data();
        auto v = state.second[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double grad = static_cast<double>(g[j]) + config.weight_decay * p[j];
            const double mj = config.beta1 * m[j] + (1.0 - config.beta1) * grad;
            const double vj = config.beta2 * v[j] + (1.0 - config.beta2) * grad * grad;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double update = (mj / c1) / (std::sqrt(vj / c2) + config.epsilon);
            p[j] = static_cast<T>(p[j] - config.learning_rate * update);
        }
    }
    ++state.step;
}

template <typename T>
void novograd_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state,
                   const OptimizerConfig& config) {
    check_and_prepare(params, state, true, true);
    const bool first_step = state.step == 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto g = params[i]->grad();
        auto m = state.first[i].data();
        double norm_sq = 0.0;
        for (T gj : g) {
            norm_sq += static_cast<double>(gj) * gj;
        }
        T& v_slot = state.second[i][0];
        const double v = first_step ? norm_sq : config.beta2 * v_slot + (1.0 - config.beta2) * norm_sq;
        v_slot = static_cast<T>(v);
        const double denom = std::sqrt(v) + config.epsilon;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double mj = config.beta1 * m[j] + g[j] / denom + config.weight_decay * p[j];
            m[j] = static_cast<T>(mj);
            p[j] = static_cast<T>(p[j] - config.learning_rate * mj);
        }
    }
    ++state.step;
}

template <typename T>
void optimizer_step(std::span<BasicTensor<T>* const> params, OptimizerState<T>& state,
                    const OptimizerConfig& config) {
    switch (config.kind) {
        case OptimizerKind::sgd: sgd_step(params, state, config); return;
        case OptimizerKind::adam: adam_step(params, state, config); return;
        case OptimizerKind::novograd: novograd_step(params, state, config); return;
    }
    throw ConfigError("unknown optimizer kind");
}

#define VOLNET_INSTANTIATE_OPT(T)                                                                           \
    template void sgd_step(std::span<BasicTensor<T>* const>, OptimizerState<T>&, const OptimizerConfig&);     \
    template void adam_step(std::span<BasicTensor<T>* const>, OptimizerState<T>&, const OptimizerConfig&);    \
    template void novograd_step(std::span<BasicTensor<T>* const>, OptimizerState<T>&, const OptimizerConfig&); \
    template void optimizer_step(std::span<BasicTensor<T>* const>, OptimizerState<T>&, const OptimizerConfig&);

VOLNET_INSTANTIATE_OPT(float)
VOLNET_INSTANTIATE_OPT(double)

#undef VOLNET_INSTANTIATE_OPT

}  // namespace volnet
