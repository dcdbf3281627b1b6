#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "lulc/data/class_map.hpp"
#include "lulc/rng.hpp"

namespace lulc::testkit {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

data::Image toy_image(std::size_t class_id, std::size_t variant, std::size_t size, std::uint64_t seed) {
    const auto color = data::ClassMap::eurosat().color(class_id);
    Rng rng(derive_seed(seed, "toy", class_id, variant));
    data::Image img(size, size, 3);
    const double period = 4.0 + 2.0 * static_cast<double>(class_id % 5);
    const bool vertical = class_id % 2 == 1;
    const double phase = rng.uniform() * period;
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double u = (vertical ? static_cast<double>(x) : static_cast<double>(y)) + phase;
            const double stripe = std::sin(2.0 * M_PI * u / period) > 0 ? 1.0 : 0.85;
            const double rgb[3] = {static_cast<double>(color.r), static_cast<double>(color.g),
                                   static_cast<double>(color.b)};
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = rgb[c] * stripe + rng.normal() * 3.0;
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return img;
}

data::LabeledDataset toy_dataset(std::size_t per_class, std::uint64_t seed, std::size_t size) {
    std::vector<data::LabeledImage> items;
    for (std::size_t k = 0; k < data::kNumClasses; ++k) {
        for (std::size_t v = 0; v < per_class; ++v) {
            items.push_back({fs::path(std::string(data::ClassMap::eurosat().name(k))) / (std::to_string(v) + ".png"), k,
                             toy_image(k, v, size, seed)});
        }
    }
    return data::LabeledDataset(std::move(items));
}

void write_toy_dataset(const fs::path& root, std::size_t per_class, std::uint64_t seed) {
    for (std::size_t k = 0; k < data::kNumClasses; ++k) {
        const fs::path dir = root / std::string(data::ClassMap::eurosat().name(k));
        fs::create_directories(dir);
        for (std::size_t v = 0; v < per_class; ++v) {
            data::write_png(dir / (std::to_string(v) + ".png"), toy_image(k, v, 64, seed));
        }
    }
}

data::Image random_image(std::size_t width, std::size_t height, std::uint64_t seed) {
    Rng rng(seed);
    data::Image img(width, height, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(256));
    return img;
}

geo::GeoRaster toy_scene(std::size_t width, std::size_t height, const geo::GeoTransform& transform,
                         const std::string& crs) {
    geo::GeoRaster r;
    r.image = data::Image(width, height, 3, 0);
    r.transform = transform;
    r.crs = crs;
    const std::size_t cols = width / 64;
    for (std::size_t by = 0; by * 64 < height; ++by) {
        for (std::size_t bx = 0; bx * 64 < width; ++bx) {
            const auto block = toy_image((by * cols + bx) % data::kNumClasses, by * 131 + bx);
            for (std::size_t y = 0; y < 64 && by * 64 + y < height; ++y) {
                for (std::size_t x = 0; x < 64 && bx * 64 + x < width; ++x) {
                    for (std::size_t c = 0; c < 3; ++c) r.image.at(by * 64 + y, bx * 64 + x, c) = block.at(y, x, c);
                }
            }
        }
    }
    return r;
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double plus = f(x);
        x[i] = orig - step;
        const double minus = f(x);
        x[i] = orig;
        g[i] = (plus - minus) / (2.0 * step);
    }
    return g;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
    }
    return worst;
}

}  // namespace lulc::testkit
