#include "run_config.hpp"

#include <fstream>

#include "lulc/error.hpp"

namespace lulc::cli {

namespace fs = std::filesystem;

vit::ViTConfig model_preset(const std::string& name) {
    if (name == "tiny") return vit::ViTConfig::tiny();
    if (name == "desk") return vit::ViTConfig::desk();
    if (name == "base16_224") return vit::ViTConfig::base16_224();
    throw ConfigError("model: unknown preset \"" + name + "\" (expected tiny, desk or base16_224)");
}

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    split.seed = s;
}

void RunConfig::validate() const {
    if (version != kRunConfigVersion) {
        throw ConfigError("version: unsupported run config version " + std::to_string(version));
    }
    model.validate();
    train.validate();
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
        throw ConfigError("split.train_fraction: must lie in (0, 1), got " + std::to_string(split.train_fraction));
    }
}

nlohmann::json RunConfig::to_json() const {
    auto t = train.to_json();
    const bool augment = train.augment;
    const auto normalization = train.normalization.to_json();
    t.erase("seed");
    t.erase("augment");
    t.erase("normalization");
    nlohmann::json j = {{"version", version},
                        {"seed", seed},
                        {"dataset", dataset.string()},
                        {"model", vit::to_json(model)},
                        {"train", t},
                        {"augment", augment},
                        {"normalization", normalization},
                        {"split", {{"train_fraction", split.train_fraction}, {"stratified", split.stratified}}},
                        {"output_dir", output_dir.string()}};
    j["init_weights"] = init_weights ? nlohmann::json(init_weights->string()) : nlohmann::json(nullptr);
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    RunConfig c;
    if (!j.contains("version")) throw ConfigError("version: required key missing");
    if (!j.contains("augment")) throw ConfigError("augment: required key missing (true or false)");
    nlohmann::json train_doc = nlohmann::json::object();
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "version") {
                c.version = value.get<int>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "dataset") {
                c.dataset = resolve(value.get<std::string>());
            } else if (key == "model") {
                c.model = value.is_string() ? model_preset(value.get<std::string>()) : vit::vit_config_from_json(value);
            } else if (key == "train") {
                if (!value.is_object()) throw ConfigError("train: expected an object");
                for (const char* reserved : {"seed", "augment", "normalization"}) {
                    if (value.contains(reserved)) {
                        throw ConfigError(std::string("train.") + reserved + ": set at the top level of the run config");
                    }
                }
                train_doc.update(value);
            } else if (key == "augment") {
                train_doc["augment"] = value.get<bool>();
            } else if (key == "normalization") {
                train_doc["normalization"] = value;
            } else if (key == "split") {
                if (!value.is_object()) throw ConfigError("split: expected an object");
                for (const auto& [sk, sv] : value.items()) {
                    if (sk == "train_fraction") c.split.train_fraction = sv.get<double>();
                    else if (sk == "stratified") c.split.stratified = sv.get<bool>();
                    else throw ConfigError("split." + sk + ": unknown key");
                }
            } else if (key == "init_weights") {
                if (!value.is_null()) c.init_weights = resolve(value.get<std::string>());
            } else if (key == "output_dir") {
                c.output_dir = resolve(value.get<std::string>());
            } else {
                throw ConfigError(key + ": unknown key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    c.train = train::TrainConfig::from_json(train_doc);
    c.set_seed(c.seed);
    c.validate();
    return c;
}

RunConfig RunConfig::read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc, path.parent_path());
}

}  // namespace lulc::cli
