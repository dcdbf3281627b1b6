#include "lulc/geo/tiling.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <thread>

#include "lulc/ad/ops.hpp"
#include "lulc/error.hpp"

namespace lulc::geo {

namespace {

std::vector<Point> parse_ring(const nlohmann::json& ring) {
    std::vector<Point> out;
    for (const auto& pos : ring) out.push_back({pos.at(0).get<double>(), pos.at(1).get<double>()});
    if (out.size() > 1 && out.front() == out.back()) out.pop_back();
    if (out.size() < 3) throw DataError("boundary ring has fewer than three vertices");
    return out;
}

Polygon parse_polygon(const nlohmann::json& coords) {
    Polygon p;
    for (const auto& ring : coords) p.rings.push_back(parse_ring(ring));
    if (p.rings.empty()) throw DataError("boundary polygon has no rings");
    return p;
}

void collect(const nlohmann::json& node, std::vector<Polygon>& out) {
    const auto type = node.at("type").get<std::string>();
    if (type == "FeatureCollection") {
        for (const auto& f : node.at("features")) collect(f, out);
    } else if (type == "Feature") {
        collect(node.at("geometry"), out);
    } else if (type == "Polygon") {
        out.push_back(parse_polygon(node.at("coordinates")));
    } else if (type == "MultiPolygon") {
        for (const auto& poly : node.at("coordinates")) out.push_back(parse_polygon(poly));
    } else {
        throw DataError("boundary geometry must be Polygon or MultiPolygon, got " + type);
    }
}

bool ring_crossings(const std::vector<Point>& ring, Point p) {
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

}  // namespace

Boundary Boundary::from_geojson(const nlohmann::json& doc) {
    std::vector<Polygon> polygons;
    try {
        collect(doc, polygons);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed boundary GeoJSON: ") + e.what());
    }
    if (polygons.empty()) throw DataError("boundary contains no polygons");
    return Boundary(std::move(polygons));
}

Boundary Boundary::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read boundary " + path.string());
    try {
        return from_geojson(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("boundary " + path.string() + " is not valid JSON: " + e.what());
    }
}

bool Boundary::contains(Point p) const {
    bool inside = false;
    for (const auto& poly : polygons_) {
        for (const auto& ring : poly.rings) {
            if (ring_crossings(ring, p)) inside = !inside;
        }
    }
    return inside;
}

std::size_t TileGrid::included() const {
    return static_cast<std::size_t>(std::count_if(tiles.begin(), tiles.end(), [](const Tile& t) { return !t.excluded; }));
}

TileGrid tile(const GeoRaster& raster, const Boundary* boundary) {
    raster.validate();
    TileGrid grid;
    grid.rows = raster.height() / kTileSize;
    grid.cols = raster.width() / kTileSize;
    grid.transform = raster.transform;
    grid.crs = raster.crs;
    grid.tiles.reserve(grid.rows * grid.cols);
    const double s = static_cast<double>(kTileSize);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            Tile t;
            t.row = r;
            t.col = c;
            t.x0 = c * kTileSize;
            t.y0 = r * kTileSize;
            const double x0 = static_cast<double>(t.x0);
            const double y0 = static_cast<double>(t.y0);
            const auto& gt = raster.transform;
            t.corners = {gt.apply(x0, y0), gt.apply(x0 + s, y0), gt.apply(x0 + s, y0 + s), gt.apply(x0, y0 + s)};
            if (boundary) t.excluded = !boundary->contains(gt.apply(x0 + s / 2, y0 + s / 2));
            grid.tiles.push_back(t);
        }
    }
    return grid;
}

data::Image extract_tile(const GeoRaster& raster, const Tile& tile, std::size_t tile_size) {
    data::Image out(tile_size, tile_size, 3);
    const auto& src = raster.image;
    for (std::size_t y = 0; y < tile_size; ++y) {
        std::copy_n(src.pixels.begin() + static_cast<long>(((tile.y0 + y) * src.width + tile.x0) * 3), tile_size * 3,
                    out.pixels.begin() + static_cast<long>(y * tile_size * 3));
    }
    return out;
}

template <typename T>
std::vector<Prediction> ViTTileClassifier<T>::classify(std::span<const data::Image* const> tiles) const {
    ad::NoGradGuard no_grad;
    auto logits = model_.forward(data::make_batch<T>(tiles, stats_, model_.config().image_size), ad::Mode::eval);
    auto probs = ad::softmax(logits, -1);
    const std::size_t k = probs.dim(1);
    std::vector<Prediction> out(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (probs.at(i * k + j) > probs.at(i * k + best)) best = j;
        }
        out[i] = {best, static_cast<double>(probs.at(i * k + best))};
    }
    return out;
}

template class ViTTileClassifier<float>;
template class ViTTileClassifier<double>;

TileGrid classify_tiles(const TileGrid& grid, const GeoRaster& raster, const TileClassifier& classifier,
                        const ClassifyOptions& options, const data::ClassMap& palette) {
    if (classifier.num_classes() != palette.size()) {
        throw ConfigError("model predicts " + std::to_string(classifier.num_classes()) + " classes but the palette has " +
                          std::to_string(palette.size()));
    }
    TileGrid out = grid;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < out.tiles.size(); ++i) {
        if (!out.tiles[i].excluded) pending.push_back(i);
    }
    if (pending.empty()) return out;
    const std::size_t bs = std::max<std::size_t>(options.batch_size, 1);
    const std::size_t num_batches = (pending.size() + bs - 1) / bs;
    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, num_batches);
    std::vector<std::exception_ptr> errors(workers);

    auto run = [&](std::size_t worker) {
        try {
            for (std::size_t b = worker; b < num_batches; b += workers) {
                const std::size_t begin = b * bs;
                const std::size_t end = std::min(pending.size(), begin + bs);
                std::vector<data::Image> images;
                images.reserve(end - begin);
                for (std::size_t i = begin; i < end; ++i) images.push_back(extract_tile(raster, out.tiles[pending[i]]));
                std::vector<const data::Image*> ptrs;
                for (const auto& im : images) ptrs.push_back(&im);
                const auto preds = classifier.classify(ptrs);
                if (preds.size() != ptrs.size()) throw DataError("classifier returned the wrong number of predictions");
                for (std::size_t i = begin; i < end; ++i) {
                    Tile& t = out.tiles[pending[i]];
                    if (preds[i - begin].class_id >= palette.size()) throw DataError("classifier returned an invalid class id");
                    t.class_id = preds[i - begin].class_id;
                    t.confidence = preds[i - begin].confidence;
                }
            }
        } catch (...) {
            errors[worker] = std::current_exception();
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

data::Image colorize(const TileGrid& grid, const data::ClassMap& palette, const ColorizeOptions& options) {
    const std::size_t s = grid.tile_size;
    data::Image img(grid.cols * s, grid.rows * s, 4, 0);
    for (const auto& t : grid.tiles) {
        std::array<std::uint8_t, 4> rgba{0, 0, 0, 255};
        if (t.excluded) {
            if (options.transparent_excluded) rgba[3] = 0;
        } else {
            if (!t.class_id) {
                throw DataError("tile (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ") is unclassified");
            }
            const auto c = palette.color(*t.class_id);
            rgba = {c.r, c.g, c.b, 255};
        }
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < s; ++x) {
                for (std::size_t ch = 0; ch < 4; ++ch) img.at(t.row * s + y, t.col * s + x, ch) = rgba[ch];
            }
        }
    }
    return img;
}

nlohmann::json legend_json(const TileGrid& grid, const data::ClassMap& palette) {
    std::vector<std::size_t> counts(palette.size(), 0);
    for (const auto& t : grid.tiles) {
        if (!t.excluded && t.class_id) counts[*t.class_id] += 1;
    }
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t i = 0; i < palette.size(); ++i) {
        const auto& info = palette.at(i);
        classes.push_back({{"class_id", i},
                           {"class_name", std::string(info.name)},
                           {"display_name", std::string(info.display_name)},
                           {"color", data::to_hex(info.color)},
                           {"tiles", counts[i]}});
    }
    return {{"tile_size", grid.tile_size}, {"rows", grid.rows}, {"cols", grid.cols}, {"crs", grid.crs},
            {"excluded_tiles", grid.tiles.size() - grid.included()}, {"classes", classes}};
}

nlohmann::json to_geojson(const TileGrid& grid, const data::ClassMap& palette) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& t : grid.tiles) {
        if (t.excluded) continue;
        std::vector<Point> ring(t.corners.begin(), t.corners.end());
        double twice_area = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const Point& a = ring[i];
            const Point& b = ring[(i + 1) % 4];
            twice_area += a.x * b.y - b.x * a.y;
        }
        if (twice_area < 0.0) std::reverse(ring.begin() + 1, ring.end());
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& p : ring) coords.push_back({p.x, p.y});
        coords.push_back({ring.front().x, ring.front().y});

        nlohmann::json props = {{"row", t.row}, {"col", t.col}};
        if (t.class_id) {
            props["class_id"] = *t.class_id;
            props["class_name"] = std::string(palette.name(*t.class_id));
            props["color"] = data::to_hex(palette.color(*t.class_id));
        } else {
            props["class_id"] = nullptr;
            props["class_name"] = nullptr;
            props["color"] = nullptr;
        }
        props["confidence"] = t.confidence ? nlohmann::json(*t.confidence) : nlohmann::json(nullptr);
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", {coords}}}},
                            {"properties", props}});
    }
    nlohmann::json doc = {{"type", "FeatureCollection"}, {"features", features}};
    if (!grid.crs.empty()) doc["crs"] = {{"type", "name"}, {"properties", {{"name", grid.crs}}}};
    return doc;
}

MapOutputs write_map_outputs(const std::filesystem::path& prefix, const TileGrid& grid, const data::ClassMap& palette,
                             const ColorizeOptions& options) {
    MapOutputs out;
    const std::string base = prefix.string();
    out.map_png = base + "_map.png";
    out.legend_json = base + "_legend.json";
    out.tiles_geojson = base + "_tiles.geojson";
    data::write_png(out.map_png, colorize(grid, palette, options));
    auto write = [](const std::filesystem::path& p, const nlohmann::json& doc) {
        std::ofstream f(p);
        if (!f) throw IoError("cannot write " + p.string());
        f << doc.dump(2) << '\n';
    };
    write(out.legend_json, legend_json(grid, palette));
    write(out.tiles_geojson, to_geojson(grid, palette));
    return out;
}

}  // namespace lulc::geo
