#include "lulc/io/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lulc::io {

namespace {

bool is_head(const std::string& name) { return name.rfind("head.", 0) == 0; }
bool is_optimizer(const std::string& name) { return name.rfind("opt.", 0) == 0; }

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

// Side of a square patch grid whose position table has `rows` rows.
std::optional<std::size_t> grid_side_for(std::size_t rows) {
    if (rows < 2) return std::nullopt;
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(rows - 1))));
    if (side * side != rows - 1) return std::nullopt;
    return side;
}

}  // namespace

template <typename T>
TensorArchive to_archive(const vit::VisionTransformer<T>& model, const train::AdamState<T>* optimizer,
                         const nlohmann::json& metadata) {
    TensorArchive archive;
    archive.metadata() = metadata.is_object() ? metadata : nlohmann::json::object();
    archive.metadata()["model"] = vit::to_json(model.config());
    const auto params = model.named_parameters();
    for (const auto& [name, t] : params) archive.put<T>(name, t.shape(), t.values());
    if (optimizer) {
        if (optimizer->m.size() != params.size()) {
            throw ShapeError("optimizer state does not match the model's parameter list");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& [name, t] = params[i];
            archive.put<T>("opt." + name + ".m", t.shape(), optimizer->m[i]);
            archive.put<T>("opt." + name + ".v", t.shape(), optimizer->v[i]);
        }
        const double step = static_cast<double>(optimizer->step);
        archive.put<double>("opt.step", {1}, std::span<const double>(&step, 1));
    }
    return archive;
}

template <typename T>
void save_checkpoint(const vit::VisionTransformer<T>& model, const std::filesystem::path& path,
                     const train::AdamState<T>* optimizer, const nlohmann::json& metadata) {
    to_archive(model, optimizer, metadata).save(path);
}

template <typename T>
vit::VisionTransformer<T> from_archive(const TensorArchive& archive, const vit::ViTConfig& expected,
                                       const LoadOptions& options, LoadReport* report) {
    vit::VisionTransformer<T> model(expected, vit::InitOptions{options.head_seed, 0.02});
    LoadReport local;
    LoadReport& r = report ? *report : local;
    r = LoadReport{};

    std::vector<std::string> missing, mismatched;
    bool reset_head = false;
    std::set<std::string> known;
    for (const auto& [name, param] : model.named_parameters()) {
        known.insert(name);
        if (!archive.contains(name)) {
            if (!options.strict && is_head(name)) {
                reset_head = true;
                continue;
            }
            missing.push_back(name);
            continue;
        }
        const ArchiveEntry& e = archive.at(name);
        if (e.shape == param.shape()) {
            model.assign(name, e.values<T>());
            r.imported.push_back(name);
            continue;
        }
        if (!options.strict && is_head(name)) {
            reset_head = true;
            continue;
        }
        if (!options.strict && name == "pos_embed" && e.shape.size() == 2 && e.shape[1] == param.shape()[1]) {
            if (auto side = grid_side_for(e.shape[0])) {
                const auto values = e.values<T>();
                model.assign(name, vit::interpolate_position_table<T>(values, e.shape[1], *side,
                                                                      expected.grid_side()));
                r.interpolated.push_back(name);
                continue;
            }
        }
        mismatched.push_back(name + " (archive " + ad::to_string(e.shape) + ", model " + ad::to_string(param.shape()) +
                             ")");
    }
    if (!mismatched.empty()) throw ConfigError("incompatible tensor shapes: " + join(mismatched));
    if (!missing.empty()) throw ConfigError("archive is missing tensors: " + join(missing));

    std::vector<std::string> unknown;
    for (const auto& name : archive.names()) {
        if (!known.count(name) && !is_optimizer(name)) unknown.push_back(name);
    }
    if (!unknown.empty()) {
        if (options.strict) throw ConfigError("archive has unknown tensors: " + join(unknown));
        r.ignored = unknown;
    }
    if (reset_head) {
        model.reset_head(options.head_seed);
        r.imported.erase(std::remove_if(r.imported.begin(), r.imported.end(), is_head), r.imported.end());
        r.reinitialized = {"head.weight", "head.bias"};
    }
    return model;
}

template <typename T>
vit::VisionTransformer<T> load_checkpoint(const std::filesystem::path& path, const vit::ViTConfig& expected,
                                          const LoadOptions& options, LoadReport* report) {
    return from_archive<T>(TensorArchive::load(path), expected, options, report);
}

std::optional<vit::ViTConfig> archive_config(const TensorArchive& archive) {
    const auto& meta = archive.metadata();
    if (!meta.contains("model")) return std::nullopt;
    return vit::vit_config_from_json(meta.at("model"));
}

template <typename T>
train::AdamState<T> adam_state_from_archive(const TensorArchive& archive, const vit::VisionTransformer<T>& model) {
    train::AdamState<T> state;
    for (const auto& [name, t] : model.named_parameters()) {
        for (const char* suffix : {".m", ".v"}) {
            const std::string key = "opt." + name + suffix;
            const auto& e = archive.at(key);
            if (e.shape != t.shape()) throw ConfigError("optimizer tensor '" + key + "' has the wrong shape");
            (suffix[1] == 'm' ? state.m : state.v).push_back(e.values<T>());
        }
    }
    state.step = static_cast<std::uint64_t>(archive.at("opt.step").values<double>().at(0));
    return state;
}

#define LULC_INSTANTIATE_CHECKPOINT(T)                                                                             \
    template TensorArchive to_archive(const vit::VisionTransformer<T>&, const train::AdamState<T>*,              \
                                      const nlohmann::json&);                                                    \
    template void save_checkpoint(const vit::VisionTransformer<T>&, const std::filesystem::path&,                \
                                  const train::AdamState<T>*, const nlohmann::json&);                            \
    template vit::VisionTransformer<T> from_archive(const TensorArchive&, const vit::ViTConfig&, const LoadOptions&, \
                                                    LoadReport*);                                                \
    template vit::VisionTransformer<T> load_checkpoint(const std::filesystem::path&, const vit::ViTConfig&,      \
                                                       const LoadOptions&, LoadReport*);                         \
    template train::AdamState<T> adam_state_from_archive(const TensorArchive&, const vit::VisionTransformer<T>&);

LULC_INSTANTIATE_CHECKPOINT(float)
LULC_INSTANTIATE_CHECKPOINT(double)

#undef LULC_INSTANTIATE_CHECKPOINT

}  // namespace lulc::io
