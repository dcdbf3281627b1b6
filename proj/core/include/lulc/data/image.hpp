#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace lulc::data {

// 8-bit raster, rows top to bottom, channels interleaved (HWC).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * channels + c];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

// PNG (any bit depth / colour type, converted to 8-bit RGB) or binary PPM
// (P6, maxval <= 255). Format chosen by file signature. Throws DataError.
Image read_image(const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// RGB or RGBA PNG. Throws IoError.
void write_png(const std::filesystem::path& path, const Image& image);
// RGB only.
void write_ppm(const std::filesystem::path& path, const Image& image);

// Bilinear resample of channel-planar float data [C, H, W] with half-pixel
// centers and edge clamping. Identity when the size is unchanged.
std::vector<float> resize_bilinear(const std::vector<float>& planes, std::size_t channels, std::size_t height,
                                   std::size_t width, std::size_t out_height, std::size_t out_width);

}  // namespace lulc::data
