#include "lulc/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "lulc/data/class_map.hpp"
#include "lulc/error.hpp"
#include "lulc/rng.hpp"

namespace lulc::data {

namespace fs = std::filesystem;

std::vector<std::size_t> LabeledDataset::labels() const {
    std::vector<std::size_t> out;
    out.reserve(items_.size());
    for (const auto& item : items_) out.push_back(item.label);
    return out;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    std::vector<LabeledImage> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(items_.at(i));
    return LabeledDataset(std::move(out));
}

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm";
}

}  // namespace

LabeledDataset load_dataset(const fs::path& root, const LoadOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw DataError("dataset root is not a directory: " + root.string());
    const ClassMap& classes = ClassMap::eurosat();

    std::vector<std::pair<fs::path, std::size_t>> files;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        auto id = classes.id_of(name);
        if (!id) throw DataError("unknown class directory '" + name + "' in " + root.string());
        for (const auto& file : fs::directory_iterator(entry.path())) {
            if (file.is_regular_file() && is_image_file(file.path())) files.emplace_back(file.path(), *id);
        }
    }
    std::sort(files.begin(), files.end(), [&](const auto& a, const auto& b) {
        return a.first.lexically_relative(root).generic_string() < b.first.lexically_relative(root).generic_string();
    });

    std::vector<LabeledImage> items;
    items.reserve(files.size());
    for (auto& [path, label] : files) {
        Image image = read_image(path);
        if (image.width != options.image_size || image.height != options.image_size || image.channels != 3) {
            throw DataError("wrong dimensions " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                            " (expected " + std::to_string(options.image_size) + "x" +
                            std::to_string(options.image_size) + ") in " + path.string());
        }
        items.push_back({std::move(path), label, std::move(image)});
    }
    return LabeledDataset(std::move(items));
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

void check_fraction(double f) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split.train_fraction must lie in (0, 1), got " + std::to_string(f));
}

std::size_t train_count(std::size_t n, double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); }

}  // namespace

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    check_fraction(spec.train_fraction);
    if (n < 10) throw DataError("split needs at least 10 items, got " + std::to_string(n));
    const std::size_t n_train = train_count(n, spec.train_fraction);
    if (n_train == 0 || n_train == n) throw DataError("split would leave one side empty");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(spec.seed, "split"));
    shuffle(order, rng);
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    out.test.assign(order.begin() + static_cast<long>(n_train), order.end());
    return out;
}

SplitIndices split_indices(const std::vector<std::size_t>& labels, const SplitSpec& spec) {
    if (!spec.stratified) return split_indices(labels.size(), spec);
    check_fraction(spec.train_fraction);
    if (labels.size() < 10) throw DataError("split needs at least 10 items, got " + std::to_string(labels.size()));
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    SplitIndices out;
    for (auto& [label, members] : by_class) {
        Rng rng(derive_seed(spec.seed, "split", label));
        shuffle(members, rng);
        const std::size_t n_train = train_count(members.size(), spec.train_fraction);
        out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
        out.test.insert(out.test.end(), members.begin() + static_cast<long>(n_train), members.end());
    }
    if (out.train.empty() || out.test.empty()) throw DataError("split would leave one side empty");
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const SplitSpec& spec) {
    const SplitIndices idx = split_indices(dataset.labels(), spec);
    return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

}  // namespace lulc::data
