#include "lulc/data/class_map.hpp"

#include <cstdio>

#include "lulc/error.hpp"

namespace lulc::data {

std::string to_hex(Rgb color) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", color.r, color.g, color.b);
    return buf;
}

const ClassMap& ClassMap::eurosat() {
    static const ClassMap map({{
        {"AnnualCrop", "Annual Crop", {230, 200, 60}},
        {"Forest", "Forest", {20, 110, 30}},
        {"HerbaceousVegetation", "Herbaceous Vegetation", {140, 200, 90}},
        {"Highway", "Highway", {128, 128, 128}},
        {"Industrial", "Industrial", {200, 40, 40}},
        {"Pasture", "Pasture", {210, 230, 140}},
        {"PermanentCrop", "Permanent Crop", {160, 100, 60}},
        {"Residential", "Residential", {240, 140, 180}},
        {"River", "River", {60, 140, 220}},
        {"SeaLake", "Sea/Lake", {20, 40, 125}},
    }});
    return map;
}

const ClassInfo& ClassMap::at(std::size_t id) const {
    if (id >= entries_.size()) throw DataError("class id " + std::to_string(id) + " out of range [0, 10)");
    return entries_[id];
}

std::optional<std::size_t> ClassMap::id_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> ClassMap::id_of(Rgb color) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].color == color) return i;
    }
    return std::nullopt;
}

}  // namespace lulc::data
