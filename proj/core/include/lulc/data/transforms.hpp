#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/ad/tensor.hpp"
#include "lulc/data/dataset.hpp"
#include "lulc/data/image.hpp"
#include "lulc/rng.hpp"

namespace lulc::data {

constexpr std::size_t kCropPad = 4;

// One draw of the training augmentation. The crop offset indexes into the
// reflect-padded image; (kCropPad, kCropPad) is the uncropped position.
struct AugmentDecision {
    std::size_t crop_x = kCropPad;
    std::size_t crop_y = kCropPad;
    bool hflip = false;
    bool vflip = false;

    static AugmentDecision identity() { return {}; }
};

AugmentDecision sample_augment(Rng& rng);
Image apply_augment(const Image& image, const AugmentDecision& decision);
// sample_augment + apply_augment. Output has the input's dimensions.
Image augment(const Image& image, Rng& rng);

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);
// Reflect-pads by `pad` (mirror without repeating the edge), then crops the
// original size at (x, y) of the padded image.
Image reflect_pad_crop(const Image& image, std::size_t pad, std::size_t x, std::size_t y);

// Per-channel statistics in [0, 1] units. The default matches the common
// ImageNet-21k ViT checkpoints.
struct NormStats {
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    std::array<double, 3> stddev{0.5, 0.5, 0.5};

    void validate() const;
    nlohmann::json to_json() const;
    static NormStats from_json(const nlohmann::json& j);
    bool operator==(const NormStats&) const = default;
};

// 8-bit RGB -> [3, H, W]: x/255 then (x - mean) / std per channel.
template <typename T>
ad::Tensor<T> normalize(const Image& image, const NormStats& stats);

// Mean and (population) standard deviation per channel over every pixel.
NormStats compute_statistics(const LabeledDataset& dataset);

// Normalized planes resized to `size` x `size` (bilinear) when the image is
// not already that size. Shared by training, evaluation and map tiling.
template <typename T>
void prepare_input(const Image& image, const NormStats& stats, std::size_t size, std::span<T> out);

template <typename T>
ad::Tensor<T> make_batch(std::span<const Image* const> images, const NormStats& stats, std::size_t size);

}  // namespace lulc::data
