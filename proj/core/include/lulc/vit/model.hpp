#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lulc/ad/ops.hpp"
#include "lulc/ad/tensor.hpp"
#include "lulc/rng.hpp"
#include "lulc/vit/config.hpp"

namespace lulc::vit {

using ad::Mode;
using ad::Tensor;

// [C, H, W] -> [N, C*P*P]; batch form [B, C, H, W] -> [B, N, C*P*P].
// Patches are enumerated in raster order (top-left first, row-major) and each
// row is the patch flattened channel-major: index = c*P*P + py*P + px.
template <typename T>
Tensor<T> patchify(const Tensor<T>& images, std::size_t patch_size);

// Optional sink for attention probabilities, one [B, h, T, T] tensor per call.
template <typename T>
struct AttentionTrace {
    std::vector<Tensor<T>> weights;
};

// q, k, v: [B, h, T, d]. Returns softmax(q k^T / sqrt(d)) v.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    AttentionTrace<T>* trace = nullptr);

template <typename T>
struct LinearParams {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]
};

template <typename T>
struct NormParams {
    Tensor<T> weight;  // [d]
    Tensor<T> bias;    // [d]
};

template <typename T>
struct EncoderBlock {
    NormParams<T> norm1;
    LinearParams<T> q, k, v, proj;
    NormParams<T> norm2;
    LinearParams<T> fc1, fc2;
};

struct InitOptions {
    std::uint64_t seed = 0;
    double stddev = 0.02;
};

// Pre-norm Vision Transformer classifier. Parameter names follow the dotted
// scheme documented in docs/parameters.md.
template <typename T>
class VisionTransformer {
public:
    using NamedParameter = std::pair<std::string, Tensor<T>>;

    VisionTransformer(const ViTConfig& config, const InitOptions& init);
    VisionTransformer(const ViTConfig& config, std::uint64_t seed)
        : VisionTransformer(config, InitOptions{seed, 0.02}) {}

    const ViTConfig& config() const { return config_; }

    // batch: [B, C, H, W] at config().image_size. Returns logits [B, num_classes].
    // `dropout_rng` is required in train mode when dropout_p > 0.
    Tensor<T> forward(const Tensor<T>& batch, Mode mode, Rng* dropout_rng = nullptr,
                      AttentionTrace<T>* trace = nullptr) const;

    // Fixed order: patch_embed, cls_token, pos_embed, blocks in order, norm, head.
    std::vector<NamedParameter> named_parameters() const;
    std::vector<Tensor<T>> parameters() const;
    std::optional<Tensor<T>> find_parameter(const std::string& name) const;
    std::size_t parameter_count() const;

    void zero_grad();
    void set_requires_grad(bool flag);

    // Overwrites the named parameter's values. Shape must match.
    void assign(const std::string& name, std::span<const T> values);

    // Fresh truncated-normal head (zero bias) drawn from `seed`.
    void reset_head(std::uint64_t seed, double stddev = 0.02);

    // Deep copy (no shared parameter nodes).
    VisionTransformer clone() const;

    template <typename U>
    VisionTransformer<U> cast() const {
        VisionTransformer<U> out(config_, InitOptions{0, 0.0});
        for (const auto& [name, tensor] : named_parameters()) {
            std::vector<U> converted(tensor.values().begin(), tensor.values().end());
            out.assign(name, converted);
        }
        return out;
    }

private:
    ViTConfig config_;
    LinearParams<T> patch_embed_;
    Tensor<T> cls_token_;  // [D]
    Tensor<T> pos_embed_;  // [N+1, D]
    std::vector<EncoderBlock<T>> blocks_;
    NormParams<T> norm_;
    LinearParams<T> head_;
};

// Resamples a position table [N_old + 1, D] to [N_new + 1, D] by bilinear
// interpolation of the square patch grid (half-pixel centers). The class
// token row is copied.
template <typename T>
std::vector<T> interpolate_position_table(std::span<const T> table, std::size_t dim,
                                          std::size_t old_side, std::size_t new_side);

}  // namespace lulc::vit
