#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "lulc/data/image.hpp"

namespace lulc::geo {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

// Affine pixel -> map transform in GDAL convention: (col, row) = (0, 0) is the
// outer corner of the top-left pixel.
//   x = origin_x + col * pixel_width + row * row_rotation
//   y = origin_y + col * col_rotation + row * pixel_height
struct GeoTransform {
    double origin_x = 0.0;
    double pixel_width = 1.0;
    double row_rotation = 0.0;
    double origin_y = 0.0;
    double col_rotation = 0.0;
    double pixel_height = -1.0;

    Point apply(double col, double row) const {
        return {origin_x + col * pixel_width + row * row_rotation, origin_y + col * col_rotation + row * pixel_height};
    }
    double determinant() const { return pixel_width * pixel_height - row_rotation * col_rotation; }
    // Map -> fractional (col, row), returned as {x: col, y: row}.
    Point invert(double x, double y) const;

    void validate() const;

    // ESRI world file lines A, D, B, E, C, F; C/F locate the centre of the
    // top-left pixel.
    static GeoTransform from_world_file(const std::array<double, 6>& lines);
    std::array<double, 6> to_world_file() const;

    bool operator==(const GeoTransform&) const = default;
};

struct GeoRaster {
    data::Image image;
    GeoTransform transform;
    std::string crs;

    std::size_t width() const { return image.width; }
    std::size_t height() const { return image.height; }
    // RGB, at least 64x64, non-degenerate transform. Throws DataError.
    void validate() const;
};

GeoTransform read_world_file(const std::filesystem::path& path);
void write_world_file(const std::filesystem::path& path, const GeoTransform& transform);

// <scene>.png|.ppm with sidecars <scene>.wld and <scene>.crs (one line).
GeoRaster read_scene(const std::filesystem::path& image_path);
void write_scene(const std::filesystem::path& image_path, const GeoRaster& raster);

}  // namespace lulc::geo
