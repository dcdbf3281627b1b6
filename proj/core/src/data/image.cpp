#include "lulc/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "lulc/error.hpp"

namespace lulc::data {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp message) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = message;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open image " + path.string());
    png_byte signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw DataError("not a PNG file: " + path.string());
    }
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    if (!png) throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    Image image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("undecodable PNG " + path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
    png_read_update_info(png, info);

    image.width = png_get_image_width(png, info);
    image.height = png_get_image_height(png, info);
    image.channels = 3;
    if (png_get_rowbytes(png, info) != image.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG layout in " + path.string());
    }
    image.pixels.resize(image.width * image.height * 3);
    rows.resize(image.height);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3 && image.channels != 4) throw IoError("write_png supports RGB or RGBA images");
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write " + path.string());
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_const_bytep> rows(image.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG " + path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width * image.channels;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    if (ppm_token(in) != "P6") throw DataError("not a binary PPM (P6) file: " + path.string());
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(ppm_token(in));
        h = std::stoul(ppm_token(in));
        maxval = std::stoul(ppm_token(in));
    } catch (const std::exception&) {
        throw DataError("malformed PPM header in " + path.string());
    }
    if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
        throw DataError("unsupported PPM dimensions or maxval in " + path.string());
    }
    Image image(w, h, 3);
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != image.pixels.size()) {
        throw DataError("truncated PPM pixel data in " + path.string());
    }
    if (maxval != 255) {
        for (auto& p : image.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
    }
    return image;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3) throw IoError("write_ppm supports RGB images only");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    char head[2] = {0, 0};
    in.read(head, 2);
    in.close();
    if (head[0] == 'P' && head[1] == '6') return read_ppm(path);
    if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P') return read_png(path);
    throw DataError("undecodable image (neither PNG nor binary PPM): " + path.string());
}

std::vector<float> resize_bilinear(const std::vector<float>& planes, std::size_t channels, std::size_t height,
                                   std::size_t width, std::size_t out_height, std::size_t out_width) {
    if (height == out_height && width == out_width) return planes;
    std::vector<float> out(channels * out_height * out_width);
    const double sy = static_cast<double>(height) / static_cast<double>(out_height);
    const double sx = static_cast<double>(width) / static_cast<double>(out_width);
    for (std::size_t y = 0; y < out_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < channels; ++c) {
                const float* p = planes.data() + c * height * width;
                const double top = p[y0 * width + x0] * (1.0 - wx) + p[y0 * width + x1] * wx;
                const double bottom = p[y1 * width + x0] * (1.0 - wx) + p[y1 * width + x1] * wx;
                out[(c * out_height + y) * out_width + x] = static_cast<float>(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return out;
}

}  // namespace lulc::data
