#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lulc/ad/tensor.hpp"

namespace lulc::train {

// Single L2 norm over every gradient element of every tensor. Tensors
// without a gradient contribute zero.
template <typename T>
double global_grad_norm(std::span<const ad::Tensor<T>> params);

// Scales all gradients by clip_norm / norm when the joint norm exceeds
// clip_norm. Returns the coefficient applied (1 when unchanged).
template <typename T>
double clip_gradients(std::span<ad::Tensor<T>> params, double clip_norm = 1.0);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t step = 0;

    static AdamState for_params(std::span<const ad::Tensor<T>> params);
};

// Bias-corrected Adam with decoupled weight decay:
//   w <- w - lr*wd*w, then w <- w - lr * m_hat / (sqrt(v_hat) + eps).
// Every parameter must carry a gradient.
template <typename T>
void adam_step(std::span<ad::Tensor<T>> params, AdamState<T>& state, double learning_rate,
               double weight_decay = 0.0, const AdamHyper& hyper = {});

}  // namespace lulc::train
