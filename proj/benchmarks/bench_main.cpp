#include <benchmark/benchmark.h>

#include "lulc/ad/ops.hpp"
#include "lulc/geo/tiling.hpp"
#include "lulc/train/loss.hpp"
#include "lulc/train/optimizer.hpp"
#include "lulc/vit/model.hpp"

using namespace lulc;

namespace {

ad::Tensor<float> random_tensor(ad::Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return ad::Tensor<float>::from_values(std::move(shape), std::move(v));
}

vit::ViTConfig preset(int which) { return which == 0 ? vit::ViTConfig::tiny() : vit::ViTConfig::desk(); }

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_tensor({n, n}, 1);
    const auto b = random_tensor({n, n}, 2);
    ad::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Forward(benchmark::State& state) {
    const auto config = preset(static_cast<int>(state.range(0)));
    const auto batch = static_cast<std::size_t>(state.range(1));
    vit::VisionTransformer<float> model(config, 0);
    const auto x = random_tensor({batch, 3, config.image_size, config.image_size}, 3);
    ad::NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, ad::Mode::eval));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_Forward)->Args({0, 32})->Args({1, 8})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const auto config = preset(static_cast<int>(state.range(0)));
    const auto batch = static_cast<std::size_t>(state.range(1));
    vit::VisionTransformer<float> model(config, 0);
    auto params = model.parameters();
    auto adam = train::AdamState<float>::for_params(params);
    const auto x = random_tensor({batch, 3, config.image_size, config.image_size}, 4);
    std::vector<std::size_t> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = i % config.num_classes;
    Rng dropout(6);
    for (auto _ : state) {
        for (auto& p : params) p.zero_grad();
        ad::backward(train::cross_entropy(model.forward(x, ad::Mode::train, &dropout), labels));
        train::clip_gradients<float>(params, 1.0);
        train::adam_step<float>(params, adam, 1e-3);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Args({0, 32})->Args({1, 8})->Unit(benchmark::kMillisecond);

// Whole-scene tiling and classification of a 640x640 raster with the tiny model.
void BM_ClassifyScene(benchmark::State& state) {
    Rng rng(5);
    geo::GeoRaster raster{data::Image(640, 640, 3), {}, "EPSG:32632"};
    for (auto& p : raster.image.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(256));
    vit::VisionTransformer<float> model(vit::ViTConfig::tiny(), 0);
    geo::ViTTileClassifier<float> classifier(model, {});
    const auto grid = geo::tile(raster);
    const geo::ClassifyOptions options{32, static_cast<std::size_t>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(geo::classify_tiles(grid, raster, classifier, options));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.tiles.size()));
}
BENCHMARK(BM_ClassifyScene)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
