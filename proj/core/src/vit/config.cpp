#include "lulc/vit/config.hpp"

#include "lulc/error.hpp"

namespace lulc::vit {

void ViTConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("model." + field + ": " + why);
    };
    if (channels == 0) fail("channels", "must be positive");
    if (patch_size == 0) fail("patch_size", "must be positive");
    if (image_size == 0) fail("image_size", "must be positive");
    if (image_size % patch_size != 0) {
        fail("image_size", std::to_string(image_size) + " is not divisible by patch_size " +
                               std::to_string(patch_size));
    }
    if (embed_dim == 0) fail("embed_dim", "must be positive");
    if (num_heads == 0) fail("num_heads", "must be positive");
    if (embed_dim % num_heads != 0) {
        fail("embed_dim", std::to_string(embed_dim) + " is not divisible by num_heads " +
                              std::to_string(num_heads));
    }
    if (num_layers == 0) fail("num_layers", "must be positive");
    if (mlp_ratio == 0) fail("mlp_ratio", "must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p", "must lie in [0, 1)");
    if (num_classes == 0) fail("num_classes", "must be positive");
    if (!(layernorm_eps > 0.0)) fail("layernorm_eps", "must be positive");
}

void ViTConfig::validate_for_eurosat() const {
    validate();
    if (num_classes != 10) {
        throw ConfigError("model.num_classes: EuroSAT has 10 classes, got " + std::to_string(num_classes));
    }
}

ViTConfig ViTConfig::tiny() {
    ViTConfig c;
    c.image_size = 16;
    c.patch_size = 8;
    c.embed_dim = 32;
    c.num_heads = 2;
    c.num_layers = 2;
    c.mlp_ratio = 4;
    c.dropout_p = 0.0;
    return c;
}

ViTConfig ViTConfig::desk() { return ViTConfig{}; }

ViTConfig ViTConfig::base16_224() {
    ViTConfig c;
    c.image_size = 224;
    c.patch_size = 16;
    c.embed_dim = 768;
    c.num_heads = 12;
    c.num_layers = 12;
    c.mlp_ratio = 4;
    c.dropout_p = 0.1;
    return c;
}

std::size_t parameter_count(const ViTConfig& c) {
    const std::size_t d = c.embed_dim;
    const std::size_t hidden = c.mlp_hidden();
    const std::size_t patch = c.patch_dim() * d + d;
    const std::size_t tokens = d + c.num_tokens() * d;
    const std::size_t block = 2 * (2 * d) + 4 * (d * d + d) + (d * hidden + hidden) + (hidden * d + d);
    const std::size_t tail = 2 * d + d * c.num_classes + c.num_classes;
    return patch + tokens + c.num_layers * block + tail;
}

}  // namespace lulc::vit

namespace lulc::vit {

nlohmann::json to_json(const ViTConfig& c) {
    return {{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"channels", c.channels},
            {"embed_dim", c.embed_dim},   {"num_heads", c.num_heads},   {"num_layers", c.num_layers},
            {"mlp_ratio", c.mlp_ratio},   {"dropout_p", c.dropout_p},   {"num_classes", c.num_classes},
            {"layernorm_eps", c.layernorm_eps}};
}

ViTConfig vit_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model: expected an object");
    ViTConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "image_size") c.image_size = value.get<std::size_t>();
            else if (key == "patch_size") c.patch_size = value.get<std::size_t>();
            else if (key == "channels") c.channels = value.get<std::size_t>();
            else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
            else if (key == "num_heads") c.num_heads = value.get<std::size_t>();
            else if (key == "num_layers") c.num_layers = value.get<std::size_t>();
            else if (key == "mlp_ratio") c.mlp_ratio = value.get<std::size_t>();
            else if (key == "dropout_p") c.dropout_p = value.get<double>();
            else if (key == "num_classes") c.num_classes = value.get<std::size_t>();
            else if (key == "layernorm_eps") c.layernorm_eps = value.get<double>();
            else throw ConfigError("model." + key + ": unknown key");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("model." + key + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

std::string describe(const ViTConfig& c) {
    return "ViT-p" + std::to_string(c.patch_size) + "-d" + std::to_string(c.embed_dim) + "-h" +
           std::to_string(c.num_heads) + "-L" + std::to_string(c.num_layers) + "@" + std::to_string(c.image_size);
}

}  // namespace lulc::vit
