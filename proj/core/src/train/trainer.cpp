#include "lulc/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "lulc/error.hpp"
#include "lulc/train/loss.hpp"
#include "lulc/train/optimizer.hpp"

namespace lulc::train {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be >= 0");
    if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("train.max_epochs must be >= 1");
    if (!(schedule.gamma > 0.0)) throw ConfigError("train.schedule.gamma must be > 0");
    if (threads == 0) throw ConfigError("threads must be >= 1");
    normalization.validate();
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"learning_rate", learning_rate},
        {"schedule",
         {{"kind", schedule.kind == LrSchedule::Kind::step ? "step" : "constant"},
          {"milestones", schedule.milestones},
          {"gamma", schedule.gamma}}},
        {"clip_norm", clip_norm},
        {"weight_decay", weight_decay},
        {"batch_size", batch_size},
        {"max_epochs", max_epochs},
        {"early_stop_patience", early_stop_patience},
        {"restore_best", restore_best},
        {"augment", augment},
        {"trainable", trainable == Trainable::head_only ? "head_only" : "all"},
        {"seed", seed},
        {"normalization", normalization.to_json()},
        {"threads", threads},
    };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train: expected an object");
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "clip_norm") c.clip_norm = value.get<double>();
            else if (key == "weight_decay") c.weight_decay = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
            else if (key == "early_stop_patience") c.early_stop_patience = value.get<std::size_t>();
            else if (key == "restore_best") c.restore_best = value.get<bool>();
            else if (key == "augment") c.augment = value.get<bool>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "threads") c.threads = value.get<std::size_t>();
            else if (key == "normalization") c.normalization = data::NormStats::from_json(value);
            else if (key == "trainable") {
                const auto s = value.get<std::string>();
                if (s == "all") c.trainable = Trainable::all;
                else if (s == "head_only") c.trainable = Trainable::head_only;
                else throw ConfigError("train.trainable: expected \"all\" or \"head_only\", got \"" + s + "\"");
            } else if (key == "schedule") {
                if (!value.is_object()) throw ConfigError("train.schedule: expected an object");
                for (const auto& [sk, sv] : value.items()) {
                    if (sk == "kind") {
                        const auto s = sv.get<std::string>();
                        if (s == "constant") c.schedule.kind = LrSchedule::Kind::constant;
                        else if (s == "step") c.schedule.kind = LrSchedule::Kind::step;
                        else throw ConfigError("train.schedule.kind: expected \"constant\" or \"step\"");
                    } else if (sk == "milestones") {
                        c.schedule.milestones = sv.get<std::vector<std::size_t>>();
                    } else if (sk == "gamma") {
                        c.schedule.gamma = sv.get<double>();
                    } else {
                        throw ConfigError("train.schedule." + sk + ": unknown key");
                    }
                }
            } else {
                throw ConfigError("train." + key + ": unknown key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("train." + key + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
    double lr = config.learning_rate;
    if (config.schedule.kind == LrSchedule::Kind::step) {
        for (auto m : config.schedule.milestones) {
            if (epoch >= m) lr *= config.schedule.gamma;
        }
    }
    return lr;
}

template <typename T>
EvalResult evaluate(const vit::VisionTransformer<T>& model, const data::LabeledDataset& dataset,
                    const data::NormStats& stats, const EvalOptions& options) {
    if (dataset.empty()) throw DataError("cannot evaluate on an empty dataset");
    const std::size_t n = dataset.size();
    const std::size_t bs = std::max<std::size_t>(options.batch_size, 1);
    const std::size_t num_batches = (n + bs - 1) / bs;
    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, num_batches);
    const std::size_t size = model.config().image_size;

    EvalResult result;
    result.predictions.assign(n, 0);
    std::vector<double> batch_loss(num_batches, 0.0);
    std::vector<std::exception_ptr> errors(workers);

    auto run = [&](std::size_t worker) {
        try {
            ad::NoGradGuard no_grad;
            for (std::size_t bi = worker; bi < num_batches; bi += workers) {
                const std::size_t begin = bi * bs;
                const std::size_t end = std::min(n, begin + bs);
                std::vector<const data::Image*> images;
                std::vector<std::size_t> labels;
                for (std::size_t i = begin; i < end; ++i) {
                    images.push_back(&dataset[i].image);
                    labels.push_back(dataset[i].label);
                }
                auto logits = model.forward(data::make_batch<T>(images, stats, size), ad::Mode::eval);
                batch_loss[bi] = static_cast<double>(cross_entropy(logits, labels).item()) * static_cast<double>(end - begin);
                auto preds = argmax_rows(logits);
                std::copy(preds.begin(), preds.end(), result.predictions.begin() + static_cast<long>(begin));
            }
        } catch (...) {
            errors[worker] = std::current_exception();
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    result.confusion = ConfusionMatrix(model.config().num_classes);
    for (std::size_t i = 0; i < n; ++i) result.confusion.add(dataset[i].label, result.predictions[i]);
    result.accuracy = result.confusion.accuracy();
    result.loss = std::accumulate(batch_loss.begin(), batch_loss.end(), 0.0) / static_cast<double>(n);
    return result;
}

template <typename T>
MetricsReport train(vit::VisionTransformer<T>& model, const data::LabeledDataset& train_set,
                    const data::LabeledDataset& val_set, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (train_set.empty()) throw DataError("training set is empty");
    if (val_set.empty()) throw DataError("validation set is empty");
    const auto started = std::chrono::steady_clock::now();
    const std::size_t size = model.config().image_size;
    const std::size_t n = train_set.size();
    const std::size_t bs = std::min(config.batch_size, n);

    std::vector<ad::Tensor<T>> trainable;
    std::vector<bool> previous_flags;
    for (auto& [name, p] : model.named_parameters()) {
        previous_flags.push_back(p.requires_grad());
        const bool on = config.trainable == Trainable::all || name.rfind("head.", 0) == 0;
        p.set_requires_grad(on);
        if (on) trainable.push_back(p);
    }
    auto state = AdamState<T>::for_params(trainable);
    auto all_params = model.parameters();

    MetricsReport report;
    report.model = vit::describe(model.config());
    report.augmented = config.augment;
    report.config = {{"model", vit::to_json(model.config())}, {"train", config.to_json()}};

    double best_accuracy = -1.0;
    std::vector<std::vector<T>> best_values;
    ConfusionMatrix best_confusion(model.config().num_classes), last_confusion(model.config().num_classes);
    std::size_t since_best = 0;
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double lr = learning_rate_at(config, epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < n; begin += bs) {
            const std::size_t end = std::min(n, begin + bs);
            std::vector<data::Image> augmented;
            std::vector<const data::Image*> images;
            std::vector<std::size_t> labels;
            if (config.augment) augmented.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const auto& item = train_set[order[i]];
                if (config.augment) {
                    Rng aug_rng(derive_seed(config.seed, "augment", epoch, order[i]));
                    augmented.push_back(data::augment(item.image, aug_rng));
                    images.push_back(&augmented.back());
                } else {
                    images.push_back(&item.image);
                }
                labels.push_back(item.label);
            }
            Rng dropout_rng(derive_seed(config.seed, "dropout", step));
            auto logits = model.forward(data::make_batch<T>(images, config.normalization, size), ad::Mode::train,
                                        &dropout_rng);
            auto loss = cross_entropy(logits, labels);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value)) {
                throw NumericalError("non-finite training loss " + std::to_string(value) + " at epoch " +
                                     std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                                     " (try a lower learning rate)");
            }
            ad::backward(loss);
            clip_gradients<T>(trainable, config.clip_norm);
            adam_step<T>(trainable, state, lr, config.weight_decay);
            for (auto& p : all_params) p.zero_grad();

            const auto preds = argmax_rows(logits);
            for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i] ? 1 : 0;
            loss_sum += value * static_cast<double>(end - begin);
            report.curves.step_loss.push_back(value);
            ++step;
        }

        const EvalResult val = evaluate(model, val_set, config.normalization, {bs, config.threads});
        EpochSummary summary{epoch, loss_sum / static_cast<double>(n),
                             static_cast<double>(correct) / static_cast<double>(n), val.loss, val.accuracy, lr};
        report.curves.train_loss.push_back(summary.train_loss);
        report.curves.train_accuracy.push_back(summary.train_accuracy);
        report.curves.val_loss.push_back(summary.val_loss);
        report.curves.val_accuracy.push_back(summary.val_accuracy);
        report.curves.learning_rate.push_back(lr);
        report.epochs_trained = epoch;
        last_confusion = val.confusion;
        if (hooks.on_epoch) hooks.on_epoch(summary);

        if (val.accuracy > best_accuracy) {
            best_accuracy = val.accuracy;
            report.best_epoch = epoch;
            best_confusion = val.confusion;
            since_best = 0;
            if (config.restore_best) {
                best_values.clear();
                for (const auto& p : all_params) best_values.emplace_back(p.values().begin(), p.values().end());
            }
        } else {
            ++since_best;
        }
        if (config.early_stop_patience > 0 && since_best >= config.early_stop_patience) {
            report.early_stopped = true;
            break;
        }
    }

    if (config.restore_best && report.best_epoch != report.epochs_trained) {
        for (std::size_t i = 0; i < all_params.size(); ++i) {
            std::copy(best_values[i].begin(), best_values[i].end(), all_params[i].mutable_values().begin());
        }
        report.final_val_accuracy = best_accuracy;
        report.confusion_matrix = best_confusion;
    } else {
        report.best_epoch = config.restore_best ? report.best_epoch : report.epochs_trained;
        report.final_val_accuracy = report.curves.val_accuracy.back();
        report.confusion_matrix = last_confusion;
    }
    for (std::size_t i = 0; i < all_params.size(); ++i) all_params[i].set_requires_grad(previous_flags[i]);
    report.total_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

template EvalResult evaluate(const vit::VisionTransformer<float>&, const data::LabeledDataset&, const data::NormStats&,
                             const EvalOptions&);
template EvalResult evaluate(const vit::VisionTransformer<double>&, const data::LabeledDataset&,
                             const data::NormStats&, const EvalOptions&);
template MetricsReport train(vit::VisionTransformer<float>&, const data::LabeledDataset&, const data::LabeledDataset&,
                             const TrainConfig&, const TrainHooks&);
template MetricsReport train(vit::VisionTransformer<double>&, const data::LabeledDataset&,
                             const data::LabeledDataset&, const TrainConfig&, const TrainHooks&);

}  // namespace lulc::train
