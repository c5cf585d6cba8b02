// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volnet/checkpoint.hpp"
#include "volnet/loss.hpp"
#include "volnet/optimizer.hpp"
#include "volnet/preprocess.hpp"
#include "volnet/regnet.hpp"
#include "volnet/volume.hpp"

namespace volnet {

struct TrainingSample {
    std::string id;
    Volume volume;
    int label = 0;
};

struct EpochStats {
    std::uint64_t epoch = 0;   // 1-based index of the finished epoch
    double mean_loss = 0.0;
    double accuracy = 0.0;     // train-mode logits, threshold 0.5
    std::size_t samples = 0;
};

struct TrainerConfig {
    OptimizerConfig optimizer;
    LossConfig loss;
    PreprocessConfig preprocess;
    std::size_t batch_size = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Owns a binary classifier and everything needed to continue training it.
///
/// Randomness: the model is initialized from Rng(seed); the loop stream starts
/// at Rng(mix_seed(seed, 1)). Each epoch draws a Fisher-Yates shuffle from the
/// loop stream, then one word `base`; sample i (position in the dataset, not in
/// the shuffle) is augmented with Rng(mix_seed(base, i)).
class Trainer {
public:
    Trainer(const RegNetConfig& architecture, const TrainerConfig& config);

    /// Continues from a checkpoint. The stored optimizer settings win over
    /// config.optimizer so a resumed run follows the same update rule.
    static Trainer resume(const Checkpoint& ckpt, const TrainerConfig& config);

    /// One pass over `data`. Throws ArgumentError on an empty dataset; step
    /// failures are rethrown with the offending sample indices appended.
    EpochStats train_epoch(std::span<const TrainingSample> data);

    /// Forward/backward/update on an already preprocessed batch [N,C,D,H,W].
    /// Returns the batch mean loss; `correct` receives the number of hits.
    double train_step(const Tensor& batch, std::span<const int> labels, std::size_t* correct = nullptr);

    /// Eval-mode sigmoid probabilities, in input order.
    std::vector<double> predict(std::span<const Volume> volumes);

    Checkpoint checkpoint() const;

    Model& model() { return model_; }
    const Model& model() const { return model_; }
    const TrainerConfig& config() const { return config_; }
    const OptimizerState<float>& optimizer_state() const { return state_; }
    std::uint64_t epoch() const { return epoch_; }

private:
    Trainer(Model model, const TrainerConfig& config);

    Model model_;
    TrainerConfig config_;
    OptimizerState<float> state_;
    Rng loop_rng_;
    std::uint64_t epoch_ = 0;
};

/// Batches preprocessed [1,D,H,W] samples into [N,1,D,H,W].
Tensor stack_batch(std::span<const Tensor> samples);

/// Eval-mode probabilities for a standalone model.
std::vector<double> predict_probabilities(Model& model, std::span<const Volume> volumes,
                                          const PreprocessConfig& preprocess, std::size_t batch_size);

}  // namespace volnet
