#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "lulc/ad/tensor.hpp"
#include "lulc/data/transforms.hpp"
#include "lulc/error.hpp"
#include "lulc/geo/raster.hpp"
#include "lulc/geo/tiling.hpp"
#include "lulc/io/checkpoint.hpp"
#include "lulc/rng.hpp"
#include "lulc/train/gradcheck.hpp"
#include "lulc/train/metrics.hpp"
#include "lulc/train/trainer.hpp"
#include "run_config.hpp"

namespace lulc::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out;
};

std::string join(const std::vector<std::string>& names) {
    std::string s;
    for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
    return s.empty() ? "-" : s;
}

RunConfig load_run_config(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = RunConfig::read(g.config);
    if (g.seed) cfg.set_seed(*g.seed);
    if (g.threads) cfg.train.threads = *g.threads;
    if (!g.out.empty()) cfg.output_dir = g.out;
    cfg.validate();
    return cfg;
}

nlohmann::json checkpoint_metadata(const data::NormStats& stats, const nlohmann::json& run_config) {
    return {{"normalization", stats.to_json()}, {"run_config", run_config}};
}

data::NormStats archive_normalization(const io::TensorArchive& archive) {
    const auto& meta = archive.metadata();
    if (meta.contains("normalization")) return data::NormStats::from_json(meta.at("normalization"));
    return {};
}

vit::ViTConfig require_archive_config(const io::TensorArchive& archive, const std::string& path) {
    auto config = io::archive_config(archive);
    if (!config) throw ConfigError("checkpoint " + path + " does not record a model configuration");
    return *config;
}

void check_same_model(const vit::ViTConfig& expected, const vit::ViTConfig& actual) {
    const auto a = vit::to_json(expected);
    const auto b = vit::to_json(actual);
    for (const auto& [key, value] : a.items()) {
        if (b.at(key) != value) {
            throw ConfigError("config/checkpoint mismatch: model." + key + " is " + value.dump() + " in the config but " +
                              b.at(key).dump() + " in the checkpoint");
        }
    }
}

int cmd_train(const Globals& g, std::ostream& out) {
    const RunConfig cfg = load_run_config(g);
    if (cfg.dataset.empty()) throw ConfigError("dataset: required for train");
    const auto dataset = data::load_dataset(cfg.dataset);
    if (dataset.empty()) throw DataError("dataset " + cfg.dataset.string() + " contains no images");
    const auto [train_set, val_set] = data::split(dataset, cfg.split);

    vit::VisionTransformer<float> model(cfg.model, vit::InitOptions{cfg.seed, 0.02});
    if (cfg.init_weights) {
        io::LoadReport load;
        model = io::load_checkpoint<float>(*cfg.init_weights, cfg.model, {false, cfg.seed}, &load);
        out << "init weights: imported " << load.imported.size() << ", reinitialized " << join(load.reinitialized)
            << '\n';
    }
    out << "model " << vit::describe(cfg.model) << " (" << model.parameter_count() << " parameters), train "
        << train_set.size() << ", val " << val_set.size() << '\n';

    train::TrainHooks hooks;
    hooks.on_epoch = [&](const train::EpochSummary& s) {
        out << "epoch " << s.epoch << " lr " << s.learning_rate << " train_loss " << s.train_loss << " train_acc "
            << s.train_accuracy << " val_loss " << s.val_loss << " val_acc " << s.val_accuracy << '\n';
    };
    auto report = train::train(model, train_set, val_set, cfg.train, hooks);
    const auto echo = cfg.to_json();
    report.config = echo;

    fs::create_directories(cfg.output_dir);
    const fs::path report_path = cfg.output_dir / "report.json";
    const fs::path checkpoint_path = cfg.output_dir / "checkpoint.vitlulc";
    train::emit_report(report, report_path);
    io::save_checkpoint(model, checkpoint_path, static_cast<const train::AdamState<float>*>(nullptr),
                        checkpoint_metadata(cfg.train.normalization, echo));
    out << "epochs " << report.epochs_trained << " best " << report.best_epoch << " val_acc "
        << report.final_val_accuracy << '\n';
    out << "wrote " << report_path.string() << '\n' << "wrote " << checkpoint_path.string() << '\n';
    return kOk;
}

struct EvalArgs {
    std::string checkpoint, dataset;
    std::size_t batch_size = 64;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
    const auto archive = io::TensorArchive::load(a.checkpoint);
    const auto model_config = require_archive_config(archive, a.checkpoint);
    data::NormStats stats = archive_normalization(archive);
    fs::path dataset_root = a.dataset;
    nlohmann::json echo = nullptr;
    std::size_t threads = g.threads.value_or(1);
    if (!g.config.empty()) {
        const RunConfig cfg = load_run_config(g);
        check_same_model(cfg.model, model_config);
        stats = cfg.train.normalization;
        if (dataset_root.empty()) dataset_root = cfg.dataset;
        threads = cfg.train.threads;
        echo = cfg.to_json();
    }
    if (dataset_root.empty()) throw ConfigError("--dataset is required (or a config with a dataset)");
    const auto model = io::from_archive<float>(archive, model_config);
    const auto dataset = data::load_dataset(dataset_root);
    if (dataset.empty()) throw DataError("dataset " + dataset_root.string() + " contains no images");
    const auto result = train::evaluate(model, dataset, stats, {a.batch_size, threads});

    nlohmann::json report = {{"model", vit::describe(model_config)},
                             {"checkpoint", a.checkpoint},
                             {"dataset", dataset_root.string()},
                             {"num_samples", dataset.size()},
                             {"loss", result.loss},
                             {"accuracy", result.accuracy},
                             {"per_class_accuracy", nlohmann::json::array()},
                             {"confusion_matrix", result.confusion.to_json()},
                             {"normalization", stats.to_json()},
                             {"config", echo}};
    for (double v : result.confusion.per_class_accuracy()) {
        report["per_class_accuracy"].push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    }
    const fs::path path = g.out.empty() ? fs::path("eval_report.json") : fs::path(g.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    train::write_json(report, path);
    out << "accuracy " << result.accuracy << " (" << result.confusion.correct() << "/" << result.confusion.total()
        << ")\nwrote " << path.string() << '\n';
    return kOk;
}

struct MapArgs {
    std::string checkpoint, scene, boundary;
    std::size_t batch_size = 32;
    bool opaque_excluded = false;
};

int cmd_map(const Globals& g, const MapArgs& a, std::ostream& out) {
    if (g.out.empty()) throw ConfigError("--out <prefix> is required for map");
    const auto archive = io::TensorArchive::load(a.checkpoint);
    const auto model_config = require_archive_config(archive, a.checkpoint);
    data::NormStats stats = archive_normalization(archive);
    if (!g.config.empty()) {
        const RunConfig cfg = load_run_config(g);
        check_same_model(cfg.model, model_config);
        stats = cfg.train.normalization;
    }
    const auto model = io::from_archive<float>(archive, model_config);
    const auto raster = geo::read_scene(a.scene);
    std::optional<geo::Boundary> boundary;
    if (!a.boundary.empty()) boundary = geo::Boundary::read(a.boundary);
    auto grid = geo::tile(raster, boundary ? &*boundary : nullptr);
    geo::ViTTileClassifier<float> classifier(model, stats);
    grid = geo::classify_tiles(grid, raster, classifier, {a.batch_size, g.threads.value_or(1)});
    const fs::path prefix(g.out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    const auto files = geo::write_map_outputs(prefix, grid, data::ClassMap::eurosat(), {!a.opaque_excluded});
    out << "tiles " << grid.tiles.size() << " (" << grid.rows << "x" << grid.cols << "), classified "
        << grid.included() << '\n';
    for (const auto& p : {files.map_png, files.legend_json, files.tiles_geojson}) out << "wrote " << p.string() << '\n';
    return kOk;
}

struct GradcheckArgs {
    std::string model = "tiny";
    int precision = 32;
    std::size_t batch_size = 2;
    double threshold = 0.0;
    std::string break_backward;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    vit::ViTConfig config = model_preset(a.model);
    std::uint64_t seed = 0;
    if (!g.config.empty()) {
        const RunConfig cfg = load_run_config(g);
        config = cfg.model;
        seed = cfg.seed;
    }
    if (g.seed) seed = *g.seed;
    if (a.precision != 32 && a.precision != 64) throw ConfigError("--precision must be 32 or 64");
    train::GradcheckOptions opts;
    opts.precision = a.precision == 32 ? train::Precision::f32 : train::Precision::f64;
    opts.batch_size = a.batch_size;
    opts.seed = seed;
    opts.threshold = a.threshold;

    struct FaultScope {
        explicit FaultScope(ad::Fault f) { ad::set_fault(f); }
        ~FaultScope() { ad::set_fault(ad::Fault::none); }
    } fault(a.break_backward.empty() ? ad::Fault::none : ad::parse_fault(a.break_backward));

    const auto report = train::gradcheck(config, opts);
    for (const auto& t : report.tensors) {
        out << std::left << std::setw(28) << t.name << std::right << std::setw(8) << t.numel << "  rel_err "
            << std::scientific << std::setprecision(3) << t.relative_error << std::defaultfloat << '\n';
    }
    out << "gradcheck " << vit::describe(config) << " " << a.precision << "-bit: " << report.tensors.size()
        << " tensors, max_rel_error " << std::scientific << std::setprecision(3) << report.max_relative_error
        << " (threshold " << report.threshold << ", worst " << report.worst_parameter << ")" << std::defaultfloat
        << std::setprecision(3) << ", " << report.seconds << " s\n";
    if (report.passed()) {
        out << "PASS\n";
        return kOk;
    }
    std::ostringstream msg;
    msg << std::scientific << std::setprecision(3) << "gradcheck failed: max relative error "
        << report.max_relative_error << " >= " << report.threshold << " at " << report.worst_parameter;
    err << "lulc: error[E_NUMERICAL]: " << msg.str() << '\n';
    return kNumerical;
}

struct ImportArgs {
    std::string source, model;
};

int cmd_import(const Globals& g, const ImportArgs& a, std::ostream& out) {
    if (g.out.empty()) throw ConfigError("--out <checkpoint> is required for import-weights");
    vit::ViTConfig config;
    data::NormStats stats;
    std::uint64_t seed = g.seed.value_or(0);
    nlohmann::json echo = nullptr;
    if (!g.config.empty()) {
        const RunConfig cfg = load_run_config(g);
        config = cfg.model;
        stats = cfg.train.normalization;
        seed = cfg.seed;
        echo = cfg.to_json();
    } else if (!a.model.empty()) {
        config = model_preset(a.model);
    } else {
        throw ConfigError("import-weights needs --config or --model");
    }
    const auto archive = io::TensorArchive::load(a.source);
    io::LoadReport load;
    const auto model = io::from_archive<float>(archive, config, {false, seed}, &load);
    const fs::path path(g.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::save_checkpoint(model, path, static_cast<const train::AdamState<float>*>(nullptr),
                        checkpoint_metadata(stats, echo));
    out << "imported " << load.imported.size() << " tensors\n"
        << "reinitialized: " << join(load.reinitialized) << '\n'
        << "interpolated: " << join(load.interpolated) << '\n'
        << "ignored: " << join(load.ignored) << '\n'
        << "wrote " << path.string() << '\n';
    return kOk;
}

int cmd_stats(const Globals& g, const std::string& dataset_root, std::ostream& out) {
    const auto dataset = data::load_dataset(dataset_root);
    if (dataset.empty()) throw DataError("dataset " + dataset_root + " contains no images");
    const auto doc = data::compute_statistics(dataset).to_json();
    if (g.out.empty()) {
        out << doc.dump() << '\n';
    } else {
        train::write_json(doc, g.out);
        out << "wrote " << g.out << '\n';
    }
    return kOk;
}

std::string single_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

int report_error(std::ostream& err, const char* code, const std::string& what, int exit_code) {
    err << "lulc: error[" << code << "]: " << single_line(what) << '\n';
    return exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vision Transformer land-use / land-cover classification and mapping"};
    app.name("lulc");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Run configuration (JSON)");
    app.add_option("--seed", g.seed, "Override the run seed");
    app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory, file or prefix");

    auto* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
    eval_cmd->add_option("--dataset", eval_args.dataset);
    eval_cmd->add_option("--batch-size", eval_args.batch_size)->check(CLI::PositiveNumber);

    MapArgs map_args;
    auto* map_cmd = app.add_subcommand("map", "Classify a georeferenced scene tile by tile");
    map_cmd->add_option("--checkpoint", map_args.checkpoint)->required();
    map_cmd->add_option("--scene", map_args.scene, "Scene image with .wld and .crs sidecars")->required();
    map_cmd->add_option("--boundary", map_args.boundary, "GeoJSON polygon in the scene CRS");
    map_cmd->add_option("--batch-size", map_args.batch_size)->check(CLI::PositiveNumber);
    map_cmd->add_flag("--opaque-excluded", map_args.opaque_excluded, "Render excluded tiles black");

    GradcheckArgs gc_args;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
    gc_cmd->add_option("--model", gc_args.model, "Model preset when no --config is given");
    gc_cmd->add_option("--precision", gc_args.precision, "32 or 64");
    gc_cmd->add_option("--batch-size", gc_args.batch_size)->check(CLI::PositiveNumber);
    gc_cmd->add_option("--threshold", gc_args.threshold);
    gc_cmd->add_option("--break-backward", gc_args.break_backward)->group("");

    ImportArgs import_args;
    auto* import_cmd = app.add_subcommand("import-weights", "Import a VITLULC1 archive with a fresh head");
    import_cmd->add_option("--source", import_args.source)->required();
    import_cmd->add_option("--model", import_args.model, "Model preset when no --config is given");

    std::string stats_root;
    auto* stats_cmd = app.add_subcommand("stats", "Per-channel mean and std of a dataset");
    stats_cmd->add_option("--dataset", stats_root)->required();

    std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv.begin(), argv.end());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return report_error(err, "E_USAGE", e.what(), kConfig);
    }

    try {
        if (*train_cmd) return cmd_train(g, out);
        if (*eval_cmd) return cmd_eval(g, eval_args, out);
        if (*map_cmd) return cmd_map(g, map_args, out);
        if (*gc_cmd) return cmd_gradcheck(g, gc_args, out, err);
        if (*import_cmd) return cmd_import(g, import_args, out);
        if (*stats_cmd) return cmd_stats(g, stats_root, out);
    } catch (const Error& e) {
        switch (e.category()) {
            case ErrorCategory::config: return report_error(err, "E_CONFIG", e.what(), kConfig);
            case ErrorCategory::shape: return report_error(err, "E_SHAPE", e.what(), kConfig);
            case ErrorCategory::data: return report_error(err, "E_DATA", e.what(), kData);
            case ErrorCategory::io: return report_error(err, "E_IO", e.what(), kData);
            case ErrorCategory::numerical: return report_error(err, "E_NUMERICAL", e.what(), kNumerical);
        }
    } catch (const std::exception& e) {
        return report_error(err, "E_INTERNAL", e.what(), kInternal);
    }
    return kInternal;
}

}  // namespace lulc::cli
