#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lulc/data/dataset.hpp"
#include "lulc/train/trainer.hpp"
#include "lulc/vit/config.hpp"

namespace lulc::cli {

constexpr int kRunConfigVersion = 1;

// One JSON document describing a full experiment. A single top-level seed
// drives every random stream; augmentation must be stated explicitly.
struct RunConfig {
    int version = kRunConfigVersion;
    std::uint64_t seed = 0;
    std::filesystem::path dataset;
    vit::ViTConfig model = vit::ViTConfig::desk();
    train::TrainConfig train;
    data::SplitSpec split;
    // Optional VITLULC1 archive imported non-strictly before training.
    std::optional<std::filesystem::path> init_weights;
    std::filesystem::path output_dir = "runs";

    // Command-line overrides, applied before validation.
    void set_seed(std::uint64_t s);
    void validate() const;
    nlohmann::json to_json() const;
    // Paths in the document are taken relative to `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig read(const std::filesystem::path& path);
};

// "tiny" | "desk" | "base16_224".
vit::ViTConfig model_preset(const std::string& name);

}  // namespace lulc::cli
