#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/data/class_map.hpp"
#include "lulc/data/transforms.hpp"
#include "lulc/geo/raster.hpp"
#include "lulc/vit/model.hpp"

namespace lulc::geo {

constexpr std::size_t kTileSize = 64;

// Exterior ring first, holes after. Rings need not repeat the first vertex.
struct Polygon {
    std::vector<std::vector<Point>> rings;
};

// Union of polygons in the raster's coordinate system.
class Boundary {
public:
    Boundary() = default;
    explicit Boundary(std::vector<Polygon> polygons) : polygons_(std::move(polygons)) {}

    // Geometry, Feature or FeatureCollection of Polygon / MultiPolygon.
    static Boundary from_geojson(const nlohmann::json& doc);
    static Boundary read(const std::filesystem::path& path);

    // Even-odd rule over all rings.
    bool contains(Point p) const;
    const std::vector<Polygon>& polygons() const { return polygons_; }

private:
    std::vector<Polygon> polygons_;
};

struct Tile {
    std::size_t row = 0, col = 0;
    // Pixel bounds [x0, x0 + size) x [y0, y0 + size).
    std::size_t x0 = 0, y0 = 0;
    // Map coordinates of the pixel-space corners (x0,y0), (x0+s,y0),
    // (x0+s,y0+s), (x0,y0+s).
    std::array<Point, 4> corners;
    bool excluded = false;
    std::optional<std::size_t> class_id;
    std::optional<double> confidence;
};

struct TileGrid {
    std::size_t tile_size = kTileSize;
    std::size_t rows = 0, cols = 0;
    GeoTransform transform;
    std::string crs;
    // Row-major.
    std::vector<Tile> tiles;

    const Tile& at(std::size_t row, std::size_t col) const { return tiles[row * cols + col]; }
    std::size_t included() const;
};

// Row-major 64x64 tiles over the top-left floor(H/64)*64 x floor(W/64)*64
// region; partial edge tiles are dropped. With a boundary, tiles whose centre
// lies outside it are marked excluded.
TileGrid tile(const GeoRaster& raster, const Boundary* boundary = nullptr);

data::Image extract_tile(const GeoRaster& raster, const Tile& tile, std::size_t tile_size = kTileSize);

struct Prediction {
    std::size_t class_id = 0;
    double confidence = 0.0;
};

// classify() must be safe to call concurrently.
class TileClassifier {
public:
    virtual ~TileClassifier() = default;
    virtual std::size_t num_classes() const = 0;
    virtual std::vector<Prediction> classify(std::span<const data::Image* const> tiles) const = 0;
};

// Eval-mode ViT over the training input path (normalize + bilinear resize).
// Confidence is the maximum softmax probability; ties go to the lowest id.
template <typename T>
class ViTTileClassifier : public TileClassifier {
public:
    ViTTileClassifier(const vit::VisionTransformer<T>& model, data::NormStats stats)
        : model_(model), stats_(stats) {}

    std::size_t num_classes() const override { return model_.config().num_classes; }
    std::vector<Prediction> classify(std::span<const data::Image* const> tiles) const override;

private:
    const vit::VisionTransformer<T>& model_;
    data::NormStats stats_;
};

struct ClassifyOptions {
    std::size_t batch_size = 32;
    std::size_t threads = 1;
};

// Labels every non-excluded tile. Output does not depend on batch size,
// thread count or tile order.
TileGrid classify_tiles(const TileGrid& grid, const GeoRaster& raster, const TileClassifier& classifier,
                        const ClassifyOptions& options = {}, const data::ClassMap& palette = data::ClassMap::eurosat());

struct ColorizeOptions {
    // Excluded tiles: transparent (alpha 0) or opaque black.
    bool transparent_excluded = true;
};

// RGBA image of rows*64 x cols*64 with each tile filled by its class colour.
data::Image colorize(const TileGrid& grid, const data::ClassMap& palette, const ColorizeOptions& options = {});

nlohmann::json legend_json(const TileGrid& grid, const data::ClassMap& palette);

// FeatureCollection, one Polygon per included tile (counter-clockwise
// exterior ring) with class_name, class_id, confidence, color, row, col.
nlohmann::json to_geojson(const TileGrid& grid, const data::ClassMap& palette);

struct MapOutputs {
    std::filesystem::path map_png, legend_json, tiles_geojson;
};

// <prefix>_map.png, <prefix>_legend.json, <prefix>_tiles.geojson.
MapOutputs write_map_outputs(const std::filesystem::path& prefix, const TileGrid& grid,
                             const data::ClassMap& palette, const ColorizeOptions& options = {});

}  // namespace lulc::geo
