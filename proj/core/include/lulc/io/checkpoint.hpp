#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lulc/io/archive.hpp"
#include "lulc/train/optimizer.hpp"
#include "lulc/vit/model.hpp"

namespace lulc::io {

// Every model parameter under its dotted name; with `optimizer`, also
// opt.<name>.m / opt.<name>.v per parameter and the scalar opt.step.
// metadata.model always carries the ViT configuration.
template <typename T>
TensorArchive to_archive(const vit::VisionTransformer<T>& model, const train::AdamState<T>* optimizer = nullptr,
                         const nlohmann::json& metadata = nlohmann::json::object());

template <typename T>
void save_checkpoint(const vit::VisionTransformer<T>& model, const std::filesystem::path& path,
                     const train::AdamState<T>* optimizer = nullptr,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct LoadReport {
    std::vector<std::string> imported;
    // head.* tensors replaced by a fresh initialization.
    std::vector<std::string> reinitialized;
    // pos_embed resampled to a new patch grid.
    std::vector<std::string> interpolated;
    // Archive tensors with no model counterpart (non-strict only).
    std::vector<std::string> ignored;
};

struct LoadOptions {
    // Exact names and shapes. Non-strict allows a missing or mismatched head
    // (freshly initialized from head_seed), a resampled position table and
    // unknown extra tensors.
    bool strict = true;
    std::uint64_t head_seed = 0;
};

// Throws ConfigError naming the offending tensors.
template <typename T>
vit::VisionTransformer<T> from_archive(const TensorArchive& archive, const vit::ViTConfig& expected,
                                       const LoadOptions& options = {}, LoadReport* report = nullptr);

template <typename T>
vit::VisionTransformer<T> load_checkpoint(const std::filesystem::path& path, const vit::ViTConfig& expected,
                                          const LoadOptions& options = {}, LoadReport* report = nullptr);

// ViT configuration recorded in metadata.model, if any.
std::optional<vit::ViTConfig> archive_config(const TensorArchive& archive);

template <typename T>
train::AdamState<T> adam_state_from_archive(const TensorArchive& archive, const vit::VisionTransformer<T>& model);

}  // namespace lulc::io
