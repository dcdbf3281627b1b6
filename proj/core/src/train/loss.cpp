#include "lulc/train/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace lulc::train {

template <typename T>
ad::Tensor<T> cross_entropy(const ad::Tensor<T>& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy expects [B,K] logits, got " + ad::to_string(logits.shape()));
    const std::size_t b = logits.dim(0);
    const std::size_t k = logits.dim(1);
    if (labels.size() != b) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(b));
    }
    for (auto l : labels) {
        if (l >= k) throw DataError("label " + std::to_string(l) + " out of range [0, " + std::to_string(k) + ")");
    }
    auto x = logits.values();
    auto probs = std::make_shared<std::vector<T>>(b * k);
    auto targets = std::make_shared<std::vector<std::size_t>>(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const T* row = x.data() + i * k;
        const T mx = *std::max_element(row, row + k);
        T denom = 0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
        const T lse = mx + std::log(denom);
        for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
        total += static_cast<double>(lse - row[labels[i]]);
    }
    const T value = static_cast<T>(total / static_cast<double>(b));
    return ad::Tensor<T>::make_result({1}, {value}, {logits}, "cross_entropy", [probs, targets, b, k](ad::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        const T s = self.grad[0] / static_cast<T>(b);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const T onehot = j == (*targets)[i] ? T(1) : T(0);
                g[i * k + j] += s * ((*probs)[i * k + j] - onehot);
            }
        }
    });
}

template <typename T>
std::vector<std::size_t> argmax_rows(const ad::Tensor<T>& logits) {
    const std::size_t b = logits.dim(0);
    const std::size_t k = logits.dim(1);
    auto x = logits.values();
    std::vector<std::size_t> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (x[i * k + j] > x[i * k + best]) best = j;
        }
        out[i] = best;
    }
    return out;
}

template ad::Tensor<float> cross_entropy(const ad::Tensor<float>&, std::span<const std::size_t>);
template ad::Tensor<double> cross_entropy(const ad::Tensor<double>&, std::span<const std::size_t>);
template std::vector<std::size_t> argmax_rows(const ad::Tensor<float>&);
template std::vector<std::size_t> argmax_rows(const ad::Tensor<double>&);

}  // namespace lulc::train
