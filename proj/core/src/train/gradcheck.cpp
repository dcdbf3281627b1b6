#include "lulc/train/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "lulc/error.hpp"
#include "lulc/rng.hpp"
#include "lulc/train/loss.hpp"
#include "lulc/vit/model.hpp"

namespace lulc::train {

double GradcheckOptions::effective_threshold() const {
    if (threshold > 0.0) return threshold;
    return precision == Precision::f32 ? 1e-3 : 1e-5;
}

namespace {

// Denominator floor relative to the global gradient norm. Tensors whose true
// gradient vanishes identically (the key bias, which softmax cancels) would
// otherwise compare roundoff against roundoff.
constexpr double kNormFloor = 1e-6;

struct Problem {
    std::vector<double> images;
    ad::Shape shape;
    std::vector<std::size_t> labels;
};

Problem make_problem(const vit::ViTConfig& config, const GradcheckOptions& options) {
    Problem p;
    p.shape = {options.batch_size, config.channels, config.image_size, config.image_size};
    Rng rng(derive_seed(options.seed, "gradcheck"));
    p.images.resize(ad::numel(p.shape));
    for (auto& v : p.images) v = rng.normal();
    for (std::size_t i = 0; i < options.batch_size; ++i) p.labels.push_back(rng.uniform_int(config.num_classes));
    return p;
}

template <typename T>
std::vector<std::vector<double>> autodiff_gradients(const vit::VisionTransformer<T>& model, const Problem& p) {
    std::vector<T> images(p.images.begin(), p.images.end());
    auto batch = ad::Tensor<T>::from_values(p.shape, std::move(images));
    auto loss = cross_entropy(model.forward(batch, ad::Mode::eval), p.labels);
    ad::backward(loss);
    std::vector<std::vector<double>> out;
    for (const auto& [name, param] : model.named_parameters()) {
        if (!param.has_grad()) throw ad::GraphError("no gradient reached " + name);
        const auto g = param.grad();
        out.emplace_back(g.begin(), g.end());
    }
    return out;
}

double loss_at(const vit::VisionTransformer<double>& model, const ad::Tensor<double>& batch, const Problem& p) {
    return cross_entropy(model.forward(batch, ad::Mode::eval), p.labels).item();
}

}  // namespace

GradcheckReport gradcheck(const vit::ViTConfig& config, const GradcheckOptions& options) {
    config.validate();
    if (options.batch_size == 0) throw ConfigError("gradcheck batch_size must be positive");
    if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
    const auto start = std::chrono::steady_clock::now();
    const Problem problem = make_problem(config, options);
    const vit::InitOptions init{options.seed, 0.02};

    std::vector<std::vector<double>> analytic;
    vit::VisionTransformer<double> reference(config, init);
    if (options.precision == Precision::f32) {
        vit::VisionTransformer<float> model(config, init);
        analytic = autodiff_gradients(model, problem);
        reference = model.cast<double>();
    } else {
        analytic = autodiff_gradients(reference, problem);
    }

    GradcheckReport report;
    report.threshold = options.effective_threshold();
    ad::NoGradGuard no_grad;
    reference.set_requires_grad(false);
    const auto batch = ad::Tensor<double>::from_values(problem.shape, problem.images);
    const auto named = reference.named_parameters();
    double global_sq = 0.0;
    for (const auto& g : analytic) {
        for (double v : g) global_sq += v * v;
    }
    const double floor = kNormFloor * std::max(std::sqrt(global_sq), 1.0);
    for (std::size_t t = 0; t < named.size(); ++t) {
        auto param = named[t].second;
        auto values = param.mutable_values();
        double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + options.step;
            const double plus = loss_at(reference, batch, problem);
            values[i] = original - options.step;
            const double minus = loss_at(reference, batch, problem);
            values[i] = original;
            const double numeric = (plus - minus) / (2.0 * options.step);
            const double a = analytic[t][i];
            diff_sq += (a - numeric) * (a - numeric);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        TensorCheck check;
        check.name = named[t].first;
        check.numel = values.size();
        check.autodiff_norm = std::sqrt(a_sq);
        const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq), floor});
        check.relative_error = std::sqrt(diff_sq) / denom;
        if (!std::isfinite(check.relative_error)) check.relative_error = INFINITY;
        if (report.tensors.empty() || check.relative_error > report.max_relative_error) {
            report.max_relative_error = check.relative_error;
            report.worst_parameter = check.name;
        }
        report.tensors.push_back(std::move(check));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace lulc::train
