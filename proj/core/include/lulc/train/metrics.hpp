#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lulc::train {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes = 10);

    void add(std::size_t truth, std::size_t predicted);
    void merge(const ConfusionMatrix& other);

    std::size_t num_classes() const { return n_; }
    std::uint64_t count(std::size_t truth, std::size_t predicted) const { return cells_[truth * n_ + predicted]; }
    std::uint64_t total() const;
    std::uint64_t correct() const;
    // correct() / total(); throws when empty.
    double accuracy() const;
    // Row-normalized diagonal; NaN for classes with no samples.
    std::vector<double> per_class_accuracy() const;

    nlohmann::json to_json() const;
    static ConfusionMatrix from_json(const nlohmann::json& j);

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t n_;
    std::vector<std::uint64_t> cells_;
};

struct Curves {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    std::vector<double> learning_rate;
    // One entry per optimizer step.
    std::vector<double> step_loss;
};

struct MetricsReport {
    std::string model;
    bool augmented = false;
    std::size_t epochs_trained = 0;
    // 1-based epoch whose weights the model holds after training.
    std::size_t best_epoch = 0;
    bool early_stopped = false;
    double total_time_sec = 0.0;
    double final_val_accuracy = 0.0;
    Curves curves;
    ConfusionMatrix confusion_matrix;
    nlohmann::json config = nlohmann::json::object();

    // Throws ConfigError: empty or ragged curves, accuracies outside [0, 1].
    void validate() const;
    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

void emit_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace lulc::train
