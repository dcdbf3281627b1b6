#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

namespace lulc::vit {

struct ViTConfig {
    std::size_t image_size = 64;
    std::size_t patch_size = 16;
    std::size_t channels = 3;
    std::size_t embed_dim = 64;
    std::size_t num_heads = 4;
    std::size_t num_layers = 4;
    std::size_t mlp_ratio = 4;
    double dropout_p = 0.1;
    std::size_t num_classes = 10;
    double layernorm_eps = 1e-6;

    std::size_t grid_side() const { return image_size / patch_size; }
    std::size_t num_patches() const { return grid_side() * grid_side(); }
    std::size_t num_tokens() const { return num_patches() + 1; }
    std::size_t patch_dim() const { return channels * patch_size * patch_size; }
    std::size_t head_dim() const { return embed_dim / num_heads; }
    std::size_t mlp_hidden() const { return mlp_ratio * embed_dim; }

    // Throws ConfigError naming the offending field.
    void validate() const;
    // validate() plus the ten-class EuroSAT head.
    void validate_for_eurosat() const;

    bool operator==(const ViTConfig&) const = default;

    // Image 16, patch 8, embed 32, 2 heads, 2 layers, MLP ratio 4, no dropout.
    static ViTConfig tiny();
    // Native 64x64 EuroSAT resolution, 16 tokens.
    static ViTConfig desk();
    // ViT-B/16 at 224: the layout of the common ImageNet-21k checkpoints.
    static ViTConfig base16_224();
};

std::size_t parameter_count(const ViTConfig& config);

nlohmann::json to_json(const ViTConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
ViTConfig vit_config_from_json(const nlohmann::json& j);

// Short human label, e.g. "ViT-p8-d32-h2-L2@16".
std::string describe(const ViTConfig& config);

}  // namespace lulc::vit
