#pragma once

#include <cstdint>
#include <vector>

#include "lulc/ad/tensor.hpp"
#include "lulc/rng.hpp"

namespace lulc::ad {

// Broadcasting rule for the binary elementwise ops: `b` either has the same
// shape as `a` or a shape equal to a trailing suffix of it (bias vectors,
// position tables).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

// a: [..., m, k]. b: [k, n] (shared across the batch) or [..., k, n] with the
// same leading dimensions as a.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x: [..., in], weight: [in, out], bias: [out] (may be undefined).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> transpose(const Tensor<T>& a, int axis0, int axis1);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t start, std::size_t length);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
// Reduces `axis` away.
template <typename T> Tensor<T> mean(const Tensor<T>& a, int axis);

// Max-subtracted softmax along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& a, int axis);

// Normalizes over the last dimension: (x - mean) / sqrt(var + eps) * gamma + beta,
// with the biased variance.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    T eps = T(1e-6));

// Exact GELU, x * Phi(x), using erf.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);

enum class Mode { train, eval };

// Inverted dropout: kept elements are scaled by 1/(1-p) in train mode; eval
// mode and p == 0 return the input unchanged.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Rng& rng);

// table: [rows, d] -> [indices.size(), d]. Repeated indices accumulate.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::size_t>& indices);

}  // namespace lulc::ad
