#include "lulc/train/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "lulc/error.hpp"

namespace lulc::train {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), cells_(num_classes * num_classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
    if (truth >= n_ || predicted >= n_) {
        throw DataError("confusion matrix index (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                        ") out of range");
    }
    cells_[truth * n_ + predicted] += 1;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw ShapeError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : cells_) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::correct() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += cells_[i * n_ + i];
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    if (t == 0) throw DataError("accuracy of an empty confusion matrix");
    return static_cast<double>(correct()) / static_cast<double>(t);
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        std::uint64_t row = 0;
        for (std::size_t j = 0; j < n_; ++j) row += cells_[i * n_ + j];
        out[i] = row == 0 ? std::numeric_limits<double>::quiet_NaN()
                          : static_cast<double>(cells_[i * n_ + i]) / static_cast<double>(row);
    }
    return out;
}

nlohmann::json ConfusionMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n_; ++i) {
        rows.push_back(std::vector<std::uint64_t>(cells_.begin() + static_cast<long>(i * n_),
                                                  cells_.begin() + static_cast<long>((i + 1) * n_)));
    }
    return rows;
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("confusion_matrix: expected a non-empty square array");
    ConfusionMatrix m(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j.size()) throw ConfigError("confusion_matrix: rows must be square");
        for (std::size_t k = 0; k < j.size(); ++k) m.cells_[i * m.n_ + k] = j[i][k].get<std::uint64_t>();
    }
    return m;
}

void MetricsReport::validate() const {
    const auto n = epochs_trained;
    if (n == 0 || curves.train_loss.empty()) throw ConfigError("report: curves are empty");
    for (const auto* series : {&curves.train_loss, &curves.train_accuracy, &curves.val_loss, &curves.val_accuracy,
                               &curves.learning_rate}) {
        if (series->size() != n) {
            throw ConfigError("report: curve length " + std::to_string(series->size()) + " != epochs_trained " +
                              std::to_string(n));
        }
    }
    for (const auto* series : {&curves.train_accuracy, &curves.val_accuracy}) {
        for (double a : *series) {
            if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("report: accuracy outside [0, 1]");
        }
    }
    if (!(final_val_accuracy >= 0.0 && final_val_accuracy <= 1.0)) {
        throw ConfigError("report: final_val_accuracy outside [0, 1]");
    }
}

nlohmann::json MetricsReport::to_json() const {
    validate();
    return {
        {"model", model},
        {"augmented", augmented},
        {"epochs_trained", epochs_trained},
        {"best_epoch", best_epoch},
        {"early_stopped", early_stopped},
        {"total_time_sec", total_time_sec},
        {"final_val_accuracy", final_val_accuracy},
        {"curves",
         {{"train_loss", curves.train_loss},
          {"train_accuracy", curves.train_accuracy},
          {"val_loss", curves.val_loss},
          {"val_accuracy", curves.val_accuracy},
          {"learning_rate", curves.learning_rate},
          {"step_loss", curves.step_loss}}},
        {"confusion_matrix", confusion_matrix.to_json()},
        {"config", config},
    };
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    try {
        r.model = j.at("model").get<std::string>();
        r.augmented = j.at("augmented").get<bool>();
        r.epochs_trained = j.at("epochs_trained").get<std::size_t>();
        r.best_epoch = j.value("best_epoch", std::size_t{0});
        r.early_stopped = j.value("early_stopped", false);
        r.total_time_sec = j.at("total_time_sec").get<double>();
        r.final_val_accuracy = j.at("final_val_accuracy").get<double>();
        const auto& c = j.at("curves");
        r.curves.train_loss = c.at("train_loss").get<std::vector<double>>();
        r.curves.train_accuracy = c.at("train_accuracy").get<std::vector<double>>();
        r.curves.val_loss = c.at("val_loss").get<std::vector<double>>();
        r.curves.val_accuracy = c.at("val_accuracy").get<std::vector<double>>();
        r.curves.learning_rate = c.at("learning_rate").get<std::vector<double>>();
        r.curves.step_loss = c.value("step_loss", std::vector<double>{});
        r.confusion_matrix = ConfusionMatrix::from_json(j.at("confusion_matrix"));
        r.config = j.value("config", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    r.validate();
    return r;
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void emit_report(const MetricsReport& report, const std::filesystem::path& path) {
    write_json(report.to_json(), path);
}

MetricsReport read_report(const std::filesystem::path& path) { return MetricsReport::from_json(read_json(path)); }

}  // namespace lulc::train
