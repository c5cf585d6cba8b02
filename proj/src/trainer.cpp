// SPDX-License-Identifier: Apache-2.0
#include "volnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace volnet {

void TrainerConfig::validate() const {
    optimizer.validate();
    loss.validate();
    preprocess.validate();
    if (batch_size == 0) {
        throw ConfigError("batch_size must be at least 1");
    }
}

namespace {

void check_binary(const RegNetConfig& arch) {
    if (arch.num_classes != 1) {
        throw ConfigError("training needs a single-logit head (num_classes = 1), got " +
                          std::to_string(arch.num_classes));
    }
}

std::string index_list(std::span<const std::size_t> idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        s += (i ? "," : "") + std::to_string(idx[i]);
    }
    return s;
}

// Rethrows the active exception with sample indices appended, keeping its type.
[[noreturn]] void rethrow_with_samples(std::span<const std::size_t> idx) {
    const std::string where = " (samples " + index_list(idx) + ")";
    try {
        throw;
    } catch (const NumericError& e) {
        throw NumericError(e.what() + where);
    } catch (const DegenerateError& e) {
        throw DegenerateError(e.what() + where);
    } catch (const ShapeError& e) {
        throw ShapeError(e.what() + where);
    } catch (const DataError& e) {
        throw DataError(e.what() + where);
    } catch (const ArgumentError& e) {
        throw ArgumentError(e.what() + where);
    } catch (const Error& e) {
        throw Error(e.what() + where);
    }
}

}  // namespace

Tensor stack_batch(std::span<const Tensor> samples) {
    if (samples.empty()) {
        throw ArgumentError("cannot batch zero samples");
    }
    const Shape& s0 = samples[0].shape();
    Shape shape{samples.size()};
    shape.insert(shape.end(), s0.begin(), s0.end());
    Tensor out(shape);
    const std::size_t n = samples[0].size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].shape() != s0) {
            throw ShapeError("batch sample " + std::to_string(i) + " has shape " +
                             shape_to_string(samples[i].shape()) + ", expected " + shape_to_string(s0));
        }
        std::copy(samples[i].data().begin(), samples[i].data().end(), out.raw() + i * n);
    }
    return out;
}

Trainer::Trainer(const RegNetConfig& architecture, const TrainerConfig& config)
    : config_(config), loop_rng_(mix_seed(config.seed, 1)) {
    config_.validate();
    check_binary(architecture);
    Rng init(config_.seed);
    model_ = Model::build(architecture, init);
}

Trainer::Trainer(Model model, const TrainerConfig& config) : model_(std::move(model)), config_(config) {}

Trainer Trainer::resume(const Checkpoint& ckpt, const TrainerConfig& config) {
    check_binary(ckpt.architecture);
    TrainerConfig cfg = config;
    cfg.optimizer = ckpt.optimizer;
    cfg.validate();
    Trainer t(restore_model(ckpt), cfg);
    t.state_ = restore_optimizer_state(ckpt, t.model_);
    t.loop_rng_.set_state(ckpt.rng_state);
    t.epoch_ = ckpt.epoch;
    return t;
}

double Trainer::train_step(const Tensor& batch, std::span<const int> labels, std::size_t* correct) {
    Tensor logits = model_.forward(batch, Mode::train);
    const BatchLoss<float> loss = weighted_bce_batch(logits, labels, config_.loss);
    if (correct != nullptr) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            hits += static_cast<std::size_t>((logits[i] >= 0.0f ? 1 : 0) == labels[i]);
        }
        *correct = hits;
    }
    model_.backward(loss.logits_grad);
    std::vector<Tensor*> params;
    for (auto& p : model_.parameters()) {
        params.push_back(p.tensor);
    }
    optimizer_step<float>(params, state_, config_.optimizer);
    return loss.mean_loss;
}

EpochStats Trainer::train_epoch(std::span<const TrainingSample> data) {
    if (data.empty()) {
        throw ArgumentError("training set is empty");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[loop_rng_.uniform_int(i)]);
    }
    const std::uint64_t aug_base = loop_rng_.next_u64();

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        try {
            std::vector<Tensor> inputs;
            std::vector<int> labels;
            for (std::size_t i : idx) {
                Rng aug(mix_seed(aug_base, i));
                inputs.push_back(preprocess_volume(data[i].volume, config_.preprocess, Mode::train, &aug));
                labels.push_back(data[i].label);
            }
            std::size_t batch_hits = 0;
            const double batch_loss = train_step(stack_batch(inputs), labels, &batch_hits);
            loss_sum += batch_loss * static_cast<double>(idx.size());
            hits += batch_hits;
        } catch (const Error&) {
            rethrow_with_samples(idx);
        }
    }
    ++epoch_;
    EpochStats stats;
    stats.epoch = epoch_;
    stats.samples = data.size();
    stats.mean_loss = loss_sum / static_cast<double>(data.size());
    stats.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
    return stats;
}

std::vector<double> Trainer::predict(std::span<const Volume> volumes) {
    return predict_probabilities(model_, volumes, config_.preprocess, config_.batch_size);
}

Checkpoint Trainer::checkpoint() const {
    return make_checkpoint(model_, config_.optimizer, state_, epoch_, loop_rng_.state());
}

std::vector<double> predict_probabilities(Model& model, std::span<const Volume> volumes,
                                          const PreprocessConfig& preprocess, std::size_t batch_size) {
    batch_size = std::max<std::size_t>(batch_size, 1);
    std::vector<double> out;
    out.reserve(volumes.size());
    for (std::size_t start = 0; start < volumes.size(); start += batch_size) {
        const std::size_t end = std::min(volumes.size(), start + batch_size);
        std::vector<Tensor> inputs;
        for (std::size_t i = start; i < end; ++i) {
            inputs.push_back(preprocess_volume(volumes[i], preprocess, Mode::eval, nullptr));
        }
        const Tensor logits = model.forward(stack_batch(inputs), Mode::eval);
        const std::size_t classes = model.config().num_classes;
        for (std::size_t i = 0; i < end - start; ++i) {
            const double z = logits[i * classes];
            if (!std::isfinite(z)) {
                throw NumericError("non-finite logit for sample " + std::to_string(start + i));
            }
            out.push_back(sigmoid(z));
        }
    }
    return out;
}

}  // namespace volnet
