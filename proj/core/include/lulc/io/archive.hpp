#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/ad/tensor.hpp"

namespace lulc::io {

enum class DType { f32, f64 };

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);

struct ArchiveEntry {
    DType dtype = DType::f32;
    ad::Shape shape;
    // Little-endian element bytes, numel(shape) * dtype_size(dtype) long.
    std::vector<std::uint8_t> bytes;

    std::size_t numel() const { return ad::numel(shape); }

    // Converts from the stored dtype when they differ.
    template <typename T>
    std::vector<T> values() const;
};

// Named tensors plus a free-form JSON metadata object, stored as
//   "VITLULC1" | u64 LE header length | UTF-8 JSON header | packed data.
// The header is {"format_version": 1, "tensors": {name: {dtype, shape,
// offset, nbytes}}, "metadata": {...}}, offsets relative to the data section.
class TensorArchive {
public:
    static constexpr char kMagic[9] = "VITLULC1";
    static constexpr int kFormatVersion = 1;

    template <typename T>
    void put(const std::string& name, const ad::Shape& shape, std::span<const T> values);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const ArchiveEntry& at(const std::string& name) const;
    void erase(const std::string& name) { entries_.erase(name); }
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    std::vector<std::uint8_t> serialize() const;
    // Throws IntegrityError on any structural inconsistency.
    static TensorArchive parse(std::span<const std::uint8_t> bytes);

    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);

private:
    std::map<std::string, ArchiveEntry> entries_;
    nlohmann::json metadata_ = nlohmann::json::object();
};

}  // namespace lulc::io
