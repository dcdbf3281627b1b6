#pragma once

#include <cstddef>
#include <span>

#include "lulc/ad/tensor.hpp"

namespace lulc::train {

// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
// logits: [B, K]; labels must lie in [0, K).
template <typename T>
ad::Tensor<T> cross_entropy(const ad::Tensor<T>& logits, std::span<const std::size_t> labels);

// Row-wise argmax; ties resolve to the lowest class index.
template <typename T>
std::vector<std::size_t> argmax_rows(const ad::Tensor<T>& logits);

}  // namespace lulc::train
