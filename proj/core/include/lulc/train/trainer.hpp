#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/data/dataset.hpp"
#include "lulc/data/transforms.hpp"
#include "lulc/train/metrics.hpp"
#include "lulc/vit/model.hpp"

namespace lulc::train {

struct LrSchedule {
    enum class Kind { constant, step };
    Kind kind = Kind::constant;
    // 1-based epochs at whose start the rate is multiplied by gamma.
    std::vector<std::size_t> milestones;
    double gamma = 0.1;
};

enum class Trainable { all, head_only };

struct TrainConfig {
    double learning_rate = 1e-3;
    LrSchedule schedule;
    double clip_norm = 1.0;
    double weight_decay = 0.0;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 15;
    // Epochs without validation-accuracy improvement before stopping; 0 disables.
    std::size_t early_stop_patience = 0;
    bool restore_best = true;
    bool augment = false;
    Trainable trainable = Trainable::all;
    std::uint64_t seed = 0;
    data::NormStats normalization;
    std::size_t threads = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Rate in effect during `epoch` (1-based).
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

struct EvalOptions {
    std::size_t batch_size = 64;
    std::size_t threads = 1;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<std::size_t> predictions;
};

// Eval-mode pass over `dataset`. Batches may be spread over `threads`
// workers; results are merged by index and do not depend on the count.
template <typename T>
EvalResult evaluate(const vit::VisionTransformer<T>& model, const data::LabeledDataset& dataset,
                    const data::NormStats& stats, const EvalOptions& options = {});

struct EpochSummary {
    std::size_t epoch = 0;
    double train_loss = 0.0, train_accuracy = 0.0, val_loss = 0.0, val_accuracy = 0.0;
    double learning_rate = 0.0;
};

struct TrainHooks {
    std::function<void(const EpochSummary&)> on_epoch;
};

// Shuffled mini-batch Adam with joint gradient clipping, optional augmentation
// and early stopping on validation accuracy. Restores the best validation
// epoch when config.restore_best. Throws DataError for empty sets and
// NumericalError when the loss becomes non-finite.
template <typename T>
MetricsReport train(vit::VisionTransformer<T>& model, const data::LabeledDataset& train_set,
                    const data::LabeledDataset& val_set, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace lulc::train
