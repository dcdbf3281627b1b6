#include "lulc/train/optimizer.hpp"

#include <cmath>

namespace lulc::train {

template <typename T>
double global_grad_norm(std::span<const ad::Tensor<T>> params) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(sq);
}

template <typename T>
double clip_gradients(std::span<ad::Tensor<T>> params, double clip_norm) {
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    const double norm = global_grad_norm<T>(params);
    if (!(norm > clip_norm)) return 1.0;
    const double coefficient = clip_norm / norm;
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        for (auto& g : p.mutable_grad()) g = static_cast<T>(g * coefficient);
    }
    return coefficient;
}

template <typename T>
AdamState<T> AdamState<T>::for_params(std::span<const ad::Tensor<T>> params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.numel(), T(0));
        s.v.emplace_back(p.numel(), T(0));
    }
    return s;
}

template <typename T>
void adam_step(std::span<ad::Tensor<T>> params, AdamState<T>& state, double learning_rate, double weight_decay,
               const AdamHyper& hyper) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("Adam state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw ad::GraphError("parameter " + std::to_string(i) + " has no gradient for the Adam step");
        }
        if (state.m[i].size() != params[i].numel()) throw ShapeError("Adam moment shape mismatch");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].mutable_values();
        auto g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            const double mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
            const double vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            double wj = w[j];
            wj -= learning_rate * weight_decay * wj;
            wj -= learning_rate * (mj / c1) / (std::sqrt(vj / c2) + hyper.eps);
            w[j] = static_cast<T>(wj);
        }
    }
}

template double global_grad_norm(std::span<const ad::Tensor<float>>);
template double global_grad_norm(std::span<const ad::Tensor<double>>);
template double clip_gradients(std::span<ad::Tensor<float>>, double);
template double clip_gradients(std::span<ad::Tensor<double>>, double);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<ad::Tensor<float>>, AdamState<float>&, double, double, const AdamHyper&);
template void adam_step(std::span<ad::Tensor<double>>, AdamState<double>&, double, double, const AdamHyper&);

}  // namespace lulc::train
