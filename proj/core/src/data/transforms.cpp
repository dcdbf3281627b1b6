#include "lulc/data/transforms.hpp"

#include <cmath>

#include "lulc/error.hpp"

namespace lulc::data {

AugmentDecision sample_augment(Rng& rng) {
    AugmentDecision d;
    d.crop_x = rng.uniform_int(2 * kCropPad + 1);
    d.crop_y = rng.uniform_int(2 * kCropPad + 1);
    d.hflip = rng.bernoulli(0.5);
    d.vflip = rng.bernoulli(0.5);
    return d;
}

Image apply_augment(const Image& image, const AugmentDecision& decision) {
    Image out = (decision.crop_x == kCropPad && decision.crop_y == kCropPad)
                    ? image
                    : reflect_pad_crop(image, kCropPad, decision.crop_x, decision.crop_y);
    if (decision.hflip) out = flip_horizontal(out);
    if (decision.vflip) out = flip_vertical(out);
    return out;
}

Image augment(const Image& image, Rng& rng) { return apply_augment(image, sample_augment(rng)); }

Image flip_horizontal(const Image& image) {
    Image out(image.width, image.height, image.channels);
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < image.channels; ++c) out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
        }
    }
    return out;
}

Image flip_vertical(const Image& image) {
    Image out(image.width, image.height, image.channels);
    const std::size_t row = image.width * image.channels;
    for (std::size_t y = 0; y < image.height; ++y) {
        std::copy_n(image.pixels.begin() + static_cast<long>(y * row), row,
                    out.pixels.begin() + static_cast<long>((image.height - 1 - y) * row));
    }
    return out;
}

namespace {

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect(long i, std::size_t n) {
    const long period = 2 * (static_cast<long>(n) - 1);
    if (period == 0) return 0;
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < static_cast<long>(n) ? i : period - i);
}

}  // namespace

Image reflect_pad_crop(const Image& image, std::size_t pad, std::size_t x, std::size_t y) {
    if (x > 2 * pad || y > 2 * pad) throw ShapeError("crop offset outside the padded image");
    Image out(image.width, image.height, image.channels);
    for (std::size_t oy = 0; oy < image.height; ++oy) {
        const std::size_t sy = reflect(static_cast<long>(oy + y) - static_cast<long>(pad), image.height);
        for (std::size_t ox = 0; ox < image.width; ++ox) {
            const std::size_t sx = reflect(static_cast<long>(ox + x) - static_cast<long>(pad), image.width);
            for (std::size_t c = 0; c < image.channels; ++c) out.at(oy, ox, c) = image.at(sy, sx, c);
        }
    }
    return out;
}

void NormStats::validate() const {
    for (double s : stddev) {
        if (!(s > 0.0)) throw ConfigError("normalization.std entries must be positive");
    }
}

nlohmann::json NormStats::to_json() const { return {{"mean", mean}, {"std", stddev}}; }

NormStats NormStats::from_json(const nlohmann::json& j) {
    NormStats s;
    try {
        s.mean = j.at("mean").get<std::array<double, 3>>();
        s.stddev = j.at("std").get<std::array<double, 3>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("normalization: expected {mean:[r,g,b], std:[r,g,b]}: ") + e.what());
    }
    s.validate();
    return s;
}

template <typename T>
ad::Tensor<T> normalize(const Image& image, const NormStats& stats) {
    if (image.channels != 3) throw ShapeError("normalize expects an RGB image");
    const std::size_t plane = image.width * image.height;
    std::vector<T> out(3 * plane);
    for (std::size_t c = 0; c < 3; ++c) {
        const double m = stats.mean[c];
        const double inv = 1.0 / stats.stddev[c];
        for (std::size_t i = 0; i < plane; ++i) {
            out[c * plane + i] = static_cast<T>((image.pixels[i * 3 + c] / 255.0 - m) * inv);
        }
    }
    return ad::Tensor<T>::from_values({3, image.height, image.width}, std::move(out));
}

NormStats compute_statistics(const LabeledDataset& dataset) {
    if (dataset.empty()) throw DataError("cannot compute statistics of an empty dataset");
    std::array<double, 3> sum{}, sq{};
    double count = 0;
    for (const auto& item : dataset.items()) {
        const auto& px = item.image.pixels;
        for (std::size_t i = 0; i + 2 < px.size(); i += 3) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = px[i + c] / 255.0;
                sum[c] += v;
                sq[c] += v * v;
            }
        }
        count += static_cast<double>(item.image.width * item.image.height);
    }
    NormStats s;
    for (std::size_t c = 0; c < 3; ++c) {
        s.mean[c] = sum[c] / count;
        s.stddev[c] = std::sqrt(std::max(sq[c] / count - s.mean[c] * s.mean[c], 0.0));
        if (s.stddev[c] == 0.0) s.stddev[c] = 1.0;
    }
    return s;
}

template <typename T>
void prepare_input(const Image& image, const NormStats& stats, std::size_t size, std::span<T> out) {
    if (image.channels != 3) throw ShapeError("prepare_input expects an RGB image");
    if (out.size() != 3 * size * size) throw ShapeError("prepare_input: output buffer has the wrong size");
    const std::size_t plane = image.width * image.height;
    std::vector<float> planes(3 * plane);
    for (std::size_t c = 0; c < 3; ++c) {
        const double m = stats.mean[c];
        const double inv = 1.0 / stats.stddev[c];
        for (std::size_t i = 0; i < plane; ++i) {
            planes[c * plane + i] = static_cast<float>((image.pixels[i * 3 + c] / 255.0 - m) * inv);
        }
    }
    auto resized = resize_bilinear(planes, 3, image.height, image.width, size, size);
    std::copy(resized.begin(), resized.end(), out.begin());
}

template <typename T>
ad::Tensor<T> make_batch(std::span<const Image* const> images, const NormStats& stats, std::size_t size) {
    if (images.empty()) throw ShapeError("make_batch: empty batch");
    const std::size_t per = 3 * size * size;
    std::vector<T> values(images.size() * per);
    for (std::size_t i = 0; i < images.size(); ++i) {
        prepare_input<T>(*images[i], stats, size, std::span<T>(values.data() + i * per, per));
    }
    return ad::Tensor<T>::from_values({images.size(), 3, size, size}, std::move(values));
}

template ad::Tensor<float> normalize(const Image&, const NormStats&);
template ad::Tensor<double> normalize(const Image&, const NormStats&);
template void prepare_input(const Image&, const NormStats&, std::size_t, std::span<float>);
template void prepare_input(const Image&, const NormStats&, std::size_t, std::span<double>);
template ad::Tensor<float> make_batch(std::span<const Image* const>, const NormStats&, std::size_t);
template ad::Tensor<double> make_batch(std::span<const Image* const>, const NormStats&, std::size_t);

}  // namespace lulc::data
