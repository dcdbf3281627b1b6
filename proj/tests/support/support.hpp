#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lulc/data/dataset.hpp"
#include "lulc/data/image.hpp"
#include "lulc/geo/raster.hpp"

namespace lulc::testkit {

// Removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "lulc");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Class-distinct toy pattern: the class palette colour modulated by stripes
// whose period and orientation depend on the class, plus per-variant noise.
data::Image toy_image(std::size_t class_id, std::size_t variant, std::size_t size = 64, std::uint64_t seed = 7);

data::LabeledDataset toy_dataset(std::size_t per_class, std::uint64_t seed = 7, std::size_t size = 64);

// <root>/<ClassName>/<variant>.png for the toy dataset.
void write_toy_dataset(const std::filesystem::path& root, std::size_t per_class, std::uint64_t seed = 7);

data::Image random_image(std::size_t width, std::size_t height, std::uint64_t seed);

// Scene whose 64x64 blocks each carry one toy pattern; block (r, c) uses
// class (r * cols + c) % 10. Identity-like geotransform unless given.
geo::GeoRaster toy_scene(std::size_t width, std::size_t height, const geo::GeoTransform& transform = {},
                         const std::string& crs = "EPSG:32632");

// Central difference of a scalar function of `x` at every coordinate.
std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8);

}  // namespace lulc::testkit
