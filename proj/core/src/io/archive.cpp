#include "lulc/io/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lulc::io {

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }
std::string dtype_name(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T read_le(const std::uint8_t* p) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
}

template <typename T>
constexpr DType dtype_of() {
    return sizeof(T) == 4 ? DType::f32 : DType::f64;
}

}  // namespace

template <typename T>
std::vector<T> ArchiveEntry::values() const {
    const std::size_t n = numel();
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = bytes.data() + i * dtype_size(dtype);
        out[i] = dtype == DType::f32 ? static_cast<T>(read_le<float>(p)) : static_cast<T>(read_le<double>(p));
    }
    return out;
}

template <typename T>
void TensorArchive::put(const std::string& name, const ad::Shape& shape, std::span<const T> values) {
    if (name.empty()) throw ConfigError("archive tensor names must be non-empty");
    if (ad::numel(shape) != values.size()) {
        throw ShapeError("archive tensor '" + name + "': shape " + ad::to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    }
    ArchiveEntry e;
    e.dtype = dtype_of<T>();
    e.shape = shape;
    e.bytes.reserve(values.size() * sizeof(T));
    for (T v : values) append_le(e.bytes, v);
    entries_[name] = std::move(e);
}

const ArchiveEntry& TensorArchive::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("archive has no tensor '" + name + "'");
    return it->second;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::vector<std::uint8_t> TensorArchive::serialize() const {
    nlohmann::json tensors = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, e] : entries_) {
        tensors[name] = {{"dtype", dtype_name(e.dtype)}, {"shape", e.shape}, {"offset", offset},
                         {"nbytes", e.bytes.size()}};
        offset += e.bytes.size();
    }
    const nlohmann::json header = {{"format_version", kFormatVersion}, {"tensors", tensors}, {"metadata", metadata_}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    append_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, e] : entries_) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
    return out;
}

TensorArchive TensorArchive::parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IntegrityError("not a VITLULC1 archive (bad magic)");
    }
    const std::uint64_t header_len = read_le<std::uint64_t>(bytes.data() + 8);
    if (header_len > bytes.size() - 16) {
        throw IntegrityError("header length " + std::to_string(header_len) + " exceeds file size");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw IntegrityError(std::string("archive header is not valid JSON: ") + e.what());
    }
    const auto data = bytes.subspan(16 + header_len);

    TensorArchive archive;
    try {
        if (header.at("format_version").get<int>() != kFormatVersion) {
            throw IntegrityError("unsupported archive format_version " + header.at("format_version").dump());
        }
        archive.metadata_ = header.value("metadata", nlohmann::json::object());
        std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
        for (const auto& [name, desc] : header.at("tensors").items()) {
            ArchiveEntry e;
            const auto dt = desc.at("dtype").get<std::string>();
            if (dt == "f32") e.dtype = DType::f32;
            else if (dt == "f64") e.dtype = DType::f64;
            else throw IntegrityError("tensor '" + name + "': unsupported dtype " + dt);
            e.shape = desc.at("shape").get<ad::Shape>();
            if (e.shape.empty() || std::find(e.shape.begin(), e.shape.end(), 0u) != e.shape.end()) {
                throw IntegrityError("tensor '" + name + "': invalid shape " + ad::to_string(e.shape));
            }
            const auto offset = desc.at("offset").get<std::uint64_t>();
            const auto nbytes = desc.at("nbytes").get<std::uint64_t>();
            if (nbytes != e.numel() * dtype_size(e.dtype)) {
                throw IntegrityError("tensor '" + name + "': declared length " + std::to_string(nbytes) +
                                     " != product(shape) * dtype size " +
                                     std::to_string(e.numel() * dtype_size(e.dtype)));
            }
            if (offset > data.size() || nbytes > data.size() - offset) {
                throw IntegrityError("tensor '" + name + "': data range exceeds the archive");
            }
            ranges.emplace_back(offset, offset + nbytes);
            e.bytes.assign(data.begin() + static_cast<long>(offset), data.begin() + static_cast<long>(offset + nbytes));
            archive.entries_[name] = std::move(e);
        }
        std::sort(ranges.begin(), ranges.end());
        std::uint64_t end = 0;
        for (auto [lo, hi] : ranges) {
            if (lo < end) throw IntegrityError("tensor data ranges overlap");
            end = hi;
        }
        if (end != data.size()) throw IntegrityError("archive data section has " + std::to_string(data.size() - end) +
                                                     " unaccounted bytes");
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed archive header: ") + e.what());
    }
    return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write archive " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing archive " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open archive " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(bytes);
}

template std::vector<float> ArchiveEntry::values<float>() const;
template std::vector<double> ArchiveEntry::values<double>() const;
template void TensorArchive::put<float>(const std::string&, const ad::Shape&, std::span<const float>);
template void TensorArchive::put<double>(const std::string&, const ad::Shape&, std::span<const double>);

}  // namespace lulc::io
