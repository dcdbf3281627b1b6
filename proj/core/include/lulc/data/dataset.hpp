#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lulc/data/image.hpp"

namespace lulc::data {

struct LabeledImage {
    std::filesystem::path path;
    std::size_t label = 0;
    Image image;
};

// Decoded images with class ids, held in memory. Immutable after loading.
class LabeledDataset {
public:
    LabeledDataset() = default;
    explicit LabeledDataset(std::vector<LabeledImage> items) : items_(std::move(items)) {}

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const LabeledImage& operator[](std::size_t i) const { return items_[i]; }
    const std::vector<LabeledImage>& items() const { return items_; }
    std::vector<std::size_t> labels() const;

    LabeledDataset subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<LabeledImage> items_;
};

struct LoadOptions {
    std::size_t image_size = 64;
};

// <root>/<ClassName>/<file>.png|.ppm. Class directories must be EuroSAT class
// names; items are ordered by lexicographic relative path. Throws DataError.
LabeledDataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    // Split each class separately (round per class) instead of the pool.
    bool stratified = false;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded Fisher-Yates shuffle of 0..n-1, then a prefix of round(f*n) items
// goes to train. Throws ConfigError for fractions outside (0, 1) and
// DataError when n < 10 or either side would be empty.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
// Honors spec.stratified.
SplitIndices split_indices(const std::vector<std::size_t>& labels, const SplitSpec& spec);

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const SplitSpec& spec);

}  // namespace lulc::data
