#include "lulc/geo/raster.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lulc/error.hpp"

namespace lulc::geo {

namespace fs = std::filesystem;

Point GeoTransform::invert(double x, double y) const {
    const double det = determinant();
    const double dx = x - origin_x;
    const double dy = y - origin_y;
    return {(dx * pixel_height - dy * row_rotation) / det, (pixel_width * dy - col_rotation * dx) / det};
}

void GeoTransform::validate() const {
    if (pixel_width == 0.0 || pixel_height == 0.0) throw DataError("geotransform pixel sizes must be nonzero");
    if (determinant() == 0.0 || !std::isfinite(determinant())) throw DataError("geotransform is not invertible");
}

GeoTransform GeoTransform::from_world_file(const std::array<double, 6>& w) {
    GeoTransform t;
    t.pixel_width = w[0];
    t.col_rotation = w[1];
    t.row_rotation = w[2];
    t.pixel_height = w[3];
    t.origin_x = w[4] - 0.5 * w[0] - 0.5 * w[2];
    t.origin_y = w[5] - 0.5 * w[1] - 0.5 * w[3];
    return t;
}

std::array<double, 6> GeoTransform::to_world_file() const {
    return {pixel_width,
            col_rotation,
            row_rotation,
            pixel_height,
            origin_x + 0.5 * pixel_width + 0.5 * row_rotation,
            origin_y + 0.5 * col_rotation + 0.5 * pixel_height};
}

void GeoRaster::validate() const {
    if (image.channels != 3) throw DataError("scene raster must be RGB");
    if (image.width < 64 || image.height < 64) {
        throw DataError("raster " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                        " is smaller than one 64x64 tile");
    }
    transform.validate();
}

GeoTransform read_world_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read world file " + path.string());
    std::array<double, 6> lines{};
    for (auto& v : lines) {
        if (!(in >> v)) throw DataError("world file " + path.string() + " must contain six numbers");
    }
    auto t = GeoTransform::from_world_file(lines);
    t.validate();
    return t;
}

void write_world_file(const fs::path& path, const GeoTransform& transform) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (double v : transform.to_world_file()) out << v << '\n';
}

GeoRaster read_scene(const fs::path& image_path) {
    if (!fs::exists(image_path)) throw DataError("scene image not found: " + image_path.string());
    const fs::path wld = fs::path(image_path).replace_extension(".wld");
    const fs::path crs = fs::path(image_path).replace_extension(".crs");
    if (!fs::exists(wld)) throw DataError("missing world file sidecar: " + wld.string());
    if (!fs::exists(crs)) throw DataError("missing CRS sidecar: " + crs.string());
    GeoRaster raster;
    raster.image = data::read_image(image_path);
    raster.transform = read_world_file(wld);
    std::ifstream in(crs);
    std::getline(in, raster.crs);
    while (!raster.crs.empty() && std::isspace(static_cast<unsigned char>(raster.crs.back()))) raster.crs.pop_back();
    if (raster.crs.empty()) throw DataError("CRS sidecar is empty: " + crs.string());
    raster.validate();
    return raster;
}

void write_scene(const fs::path& image_path, const GeoRaster& raster) {
    const auto ext = image_path.extension().string();
    if (ext == ".ppm") data::write_ppm(image_path, raster.image);
    else data::write_png(image_path, raster.image);
    write_world_file(fs::path(image_path).replace_extension(".wld"), raster.transform);
    std::ofstream out(fs::path(image_path).replace_extension(".crs"));
    out << raster.crs << '\n';
}

}  // namespace lulc::geo
