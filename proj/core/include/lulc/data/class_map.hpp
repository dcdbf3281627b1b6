#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lulc::data {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

std::string to_hex(Rgb color);

struct ClassInfo {
    std::string_view name;
    std::string_view display_name;
    Rgb color;
};

constexpr std::size_t kNumClasses = 10;

// The ten EuroSAT scene classes. Ids follow the dataset's alphabetical
// directory order; colours are distinct so the palette is invertible.
class ClassMap {
public:
    static const ClassMap& eurosat();

    std::size_t size() const { return entries_.size(); }
    const ClassInfo& at(std::size_t id) const;
    std::string_view name(std::size_t id) const { return at(id).name; }
    Rgb color(std::size_t id) const { return at(id).color; }
    std::optional<std::size_t> id_of(std::string_view name) const;
    std::optional<std::size_t> id_of(Rgb color) const;
    const std::array<ClassInfo, kNumClasses>& entries() const { return entries_; }

private:
    explicit ClassMap(std::array<ClassInfo, kNumClasses> entries) : entries_(entries) {}

    std::array<ClassInfo, kNumClasses> entries_;
};

}  // namespace lulc::data
