#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "golden.hpp"
#include "lulc/ad/ops.hpp"
#include "lulc/error.hpp"
#include "lulc/vit/config.hpp"
#include "lulc/vit/model.hpp"

using namespace lulc;
using TD = ad::Tensor<double>;
using TF = ad::Tensor<float>;
using vit::ViTConfig;
using vit::VisionTransformer;

namespace {

std::vector<double> iota_values(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
    return v;
}

TF random_batch(const ViTConfig& c, std::size_t b, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(b * c.channels * c.image_size * c.image_size);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return TF::from_values({b, c.channels, c.image_size, c.image_size}, std::move(v));
}

std::vector<float> row(const TF& t, std::size_t r) {
    const std::size_t k = t.dim(-1);
    return {t.values().begin() + static_cast<long>(r * k), t.values().begin() + static_cast<long>((r + 1) * k)};
}

}  // namespace

TEST(Config, Invariants) {
    ViTConfig c;
    EXPECT_NO_THROW(c.validate_for_eurosat());
    c.patch_size = 15;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ViTConfig{};
    c.num_heads = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ViTConfig{};
    c.dropout_p = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ViTConfig{};
    c.num_classes = 12;
    EXPECT_NO_THROW(c.validate());
    EXPECT_THROW(c.validate_for_eurosat(), ConfigError);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
    const auto c = ViTConfig::tiny();
    EXPECT_EQ(vit::to_json(vit::vit_config_from_json(vit::to_json(c))), vit::to_json(c));
    auto j = vit::to_json(c);
    j["embed_dims"] = 3;
    EXPECT_THROW(vit::vit_config_from_json(j), ConfigError);
}

TEST(Patchify, EuroSatNativeResolution) {
    auto p = vit::patchify(TD::zeros({3, 64, 64}), 16);
    EXPECT_EQ(p.shape(), (ad::Shape{16, 768}));
}

TEST(Patchify, SinglePatchIsFlattenedImage) {
    const auto v = iota_values(3 * 16 * 16);
    auto p = vit::patchify(TD::from_values({3, 16, 16}, v), 16);
    EXPECT_EQ(p.shape(), (ad::Shape{1, 768}));
    EXPECT_EQ(std::vector<double>(p.values().begin(), p.values().end()), v);
}

TEST(Patchify, HandComputedIndexMap) {
    // 8x8 single-channel image with pixel value = y*8 + x, P = 4. Patch order:
    // top-left, top-right, bottom-left, bottom-right; rows read left to right.
    auto p = vit::patchify(TD::from_values({1, 8, 8}, iota_values(64)), 4);
    ASSERT_EQ(p.shape(), (ad::Shape{4, 16}));
    const std::vector<std::vector<double>> expected = {
        {0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19, 24, 25, 26, 27},
        {4, 5, 6, 7, 12, 13, 14, 15, 20, 21, 22, 23, 28, 29, 30, 31},
        {32, 33, 34, 35, 40, 41, 42, 43, 48, 49, 50, 51, 56, 57, 58, 59},
        {36, 37, 38, 39, 44, 45, 46, 47, 52, 53, 54, 55, 60, 61, 62, 63}};
    std::vector<bool> seen(64, false);
    for (std::size_t n = 0; n < 4; ++n) {
        for (std::size_t i = 0; i < 16; ++i) {
            EXPECT_EQ(p.at(n * 16 + i), expected[n][i]);
            seen[static_cast<std::size_t>(p.at(n * 16 + i))] = true;
        }
    }
    for (bool s : seen) EXPECT_TRUE(s);
}

TEST(Patchify, ChannelMajorRows) {
    auto p = vit::patchify(TD::from_values({2, 2, 2}, iota_values(8)), 2);
    EXPECT_EQ(std::vector<double>(p.values().begin(), p.values().end()), iota_values(8));
}

TEST(Patchify, RejectsIndivisibleSize) { EXPECT_THROW(vit::patchify(TD::zeros({3, 10, 10}), 4), ShapeError); }

TEST(Attention, SingleTokenReturnsValues) {
    Rng rng(1);
    std::vector<double> qv(8), kv(8), vv(8);
    for (auto* vec : {&qv, &kv, &vv})
        for (auto& x : *vec) x = rng.normal();
    auto out = vit::attention(TD::from_values({1, 2, 1, 4}, qv), TD::from_values({1, 2, 1, 4}, kv),
                              TD::from_values({1, 2, 1, 4}, vv));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(out.at(i), vv[i]);
}

TEST(Attention, ZeroQueryAveragesValues) {
    Rng rng(2);
    std::vector<double> kv(12), vv(12);
    for (auto& x : kv) x = rng.normal();
    for (auto& x : vv) x = rng.normal();
    auto out = vit::attention(TD::zeros({1, 1, 3, 4}), TD::from_values({1, 1, 3, 4}, kv), TD::from_values({1, 1, 3, 4}, vv));
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 0; j < 4; ++j)
            EXPECT_NEAR(out.at(t * 4 + j), (vv[j] + vv[4 + j] + vv[8 + j]) / 3.0, 1e-12);
}

TEST(Attention, MatchesNaiveLoop) {
    const std::size_t B = 1, H = 2, T = 3, D = 4;
    Rng rng(3);
    std::vector<double> q(B * H * T * D), k(q.size()), v(q.size());
    for (auto* vec : {&q, &k, &v})
        for (auto& x : *vec) x = rng.normal();
    vit::AttentionTrace<double> trace;
    auto out = vit::attention(TD::from_values({B, H, T, D}, q), TD::from_values({B, H, T, D}, k),
                              TD::from_values({B, H, T, D}, v), &trace);
    ASSERT_EQ(trace.weights.size(), 1u);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < T; ++i) {
            std::vector<double> s(T);
            double mx = -1e300, z = 0;
            for (std::size_t j = 0; j < T; ++j) {
                double dot = 0;
                for (std::size_t d = 0; d < D; ++d) dot += q[(h * T + i) * D + d] * k[(h * T + j) * D + d];
                s[j] = dot / std::sqrt(static_cast<double>(D));
                mx = std::max(mx, s[j]);
            }
            for (auto& x : s) z += (x = std::exp(x - mx));
            double rowsum = 0;
            for (std::size_t j = 0; j < T; ++j) rowsum += trace.weights[0].at((h * T + i) * T + j);
            EXPECT_NEAR(rowsum, 1.0, 1e-6);
            for (std::size_t d = 0; d < D; ++d) {
                double o = 0;
                for (std::size_t j = 0; j < T; ++j) o += s[j] / z * v[(h * T + j) * D + d];
                EXPECT_NEAR(out.at((h * T + i) * D + d), o, 1e-6);
            }
        }
    }
}

TEST(Attention, HeadDimensionMismatch) {
    EXPECT_THROW(vit::attention(TD::zeros({1, 2, 3, 4}), TD::zeros({1, 2, 3, 5}), TD::zeros({1, 2, 3, 4})), ShapeError);
}

TEST(Model, TinyParameterCountMatchesHandFormula) {
    // patch_embed 192*32+32, cls 32, pos 5*32, per block: two norms 4*32,
    // q/k/v/proj 4*(32*32+32), fc1 32*128+128, fc2 128*32+32; final norm 64;
    // head 32*10+10.
    const std::size_t block = 128 + 4 * (1024 + 32) + (4096 + 128) + (4096 + 32);
    const std::size_t expected = (6144 + 32) + 32 + 160 + 2 * block + 64 + 330;
    EXPECT_EQ(expected, 32170u);
    const auto c = ViTConfig::tiny();
    EXPECT_EQ(vit::parameter_count(c), expected);
    VisionTransformer<float> m(c, 0);
    EXPECT_EQ(m.parameter_count(), expected);
    std::size_t summed = 0;
    for (const auto& [name, p] : m.named_parameters()) summed += p.numel();
    EXPECT_EQ(summed, expected);
}

TEST(Model, ParameterNamesAndShapes) {
    VisionTransformer<float> m(ViTConfig::tiny(), 0);
    const auto named = m.named_parameters();
    ASSERT_EQ(named.size(), 4u + 2 * 16 + 4);
    EXPECT_EQ(named.front().first, "patch_embed.weight");
    EXPECT_EQ(named.front().second.shape(), (ad::Shape{192, 32}));
    EXPECT_EQ(m.find_parameter("cls_token")->shape(), (ad::Shape{32}));
    EXPECT_EQ(m.find_parameter("pos_embed")->shape(), (ad::Shape{5, 32}));
    EXPECT_EQ(m.find_parameter("blocks.1.attn.q.weight")->shape(), (ad::Shape{32, 32}));
    EXPECT_EQ(m.find_parameter("blocks.0.mlp.fc1.bias")->shape(), (ad::Shape{128}));
    EXPECT_EQ(m.find_parameter("head.weight")->shape(), (ad::Shape{32, 10}));
    EXPECT_EQ(named.back().first, "head.bias");
    EXPECT_FALSE(m.find_parameter("blocks.2.attn.q.weight"));
}

TEST(Model, InitializationContract) {
    VisionTransformer<double> m(ViTConfig::tiny(), 5);
    for (const auto& [name, p] : m.named_parameters()) {
        const bool is_norm_weight = name.find("norm") != std::string::npos && name.ends_with(".weight");
        for (double v : p.values()) {
            if (name.ends_with(".bias") || name == "cls_token") EXPECT_EQ(v, 0.0) << name;
            else if (is_norm_weight) EXPECT_EQ(v, 1.0) << name;
            else EXPECT_LE(std::abs(v), 0.04 + 1e-12) << name;
        }
    }
    // Sample standard deviation of a truncated normal(0, 0.02) at +-2 sigma.
    const auto w = m.find_parameter("patch_embed.weight")->values();
    double sq = 0;
    for (double v : w) sq += v * v;
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(w.size())), 0.02 * 0.8796, 0.001);
}

TEST(Model, SameSeedBitwiseIdentical) {
    VisionTransformer<float> a(ViTConfig::tiny(), 9), b(ViTConfig::tiny(), 9), c(ViTConfig::tiny(), 10);
    const auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const auto va = pa[i].second.values();
        EXPECT_TRUE(std::equal(va.begin(), va.end(), pb[i].second.values().begin()));
        if (!std::equal(va.begin(), va.end(), pc[i].second.values().begin())) any_diff = true;
    }
    EXPECT_TRUE(any_diff);
}

TEST(Model, ZeroStddevGivesUniformLogits) {
    VisionTransformer<float> m(ViTConfig::tiny(), vit::InitOptions{3, 0.0});
    auto logits = m.forward(random_batch(ViTConfig::tiny(), 2, 4), ad::Mode::eval);
    for (float v : logits.values()) EXPECT_EQ(v, logits.at(0));
}

TEST(Model, OutputShapeAndIdenticalRows) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<float> m(c, 1);
    auto one = random_batch(c, 1, 8);
    auto batch = ad::concat<float>({one, random_batch(c, 1, 9), one}, 0);
    auto logits = m.forward(batch, ad::Mode::eval);
    EXPECT_EQ(logits.shape(), (ad::Shape{3, 10}));
    EXPECT_EQ(row(logits, 0), row(logits, 2));
}

TEST(Model, BatchEquivariance) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<double> m(c, 2);
    auto a = random_batch(c, 1, 11).cast<double>(), b = random_batch(c, 1, 12).cast<double>(),
         d = random_batch(c, 1, 13).cast<double>();
    auto l1 = m.forward(ad::concat<double>({a, b, d}, 0), ad::Mode::eval);
    auto l2 = m.forward(ad::concat<double>({d, a, b}, 0), ad::Mode::eval);
    for (std::size_t j = 0; j < 10; ++j) {
        EXPECT_NEAR(l1.at(0 * 10 + j), l2.at(1 * 10 + j), 1e-12);
        EXPECT_NEAR(l1.at(1 * 10 + j), l2.at(2 * 10 + j), 1e-12);
        EXPECT_NEAR(l1.at(2 * 10 + j), l2.at(0 * 10 + j), 1e-12);
    }
}

TEST(Model, EvalForwardIsPure) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<float> m(c, 3);
    const auto before = m.clone();
    auto x = random_batch(c, 2, 5);
    auto l1 = m.forward(x, ad::Mode::eval);
    auto l2 = m.forward(x, ad::Mode::eval);
    EXPECT_EQ(row(l1, 0), row(l2, 0));
    const auto pa = m.named_parameters(), pb = before.named_parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                               pb[i].second.values().begin()));
    }
}

TEST(Model, WrongSpatialSize) {
    VisionTransformer<float> m(ViTConfig::tiny(), 0);
    EXPECT_THROW(m.forward(TF::zeros({1, 3, 32, 32}), ad::Mode::eval), ShapeError);
}

TEST(Model, TrainModeDropoutNeedsRngAndVaries) {
    auto c = ViTConfig::tiny();
    c.dropout_p = 0.3;
    VisionTransformer<float> m(c, 0);
    auto x = random_batch(c, 2, 6);
    EXPECT_THROW(m.forward(x, ad::Mode::train), ConfigError);
    Rng r1(1), r2(2);
    auto a = m.forward(x, ad::Mode::train, &r1);
    auto b = m.forward(x, ad::Mode::train, &r2);
    EXPECT_NE(row(a, 0), row(b, 0));
    EXPECT_EQ(row(m.forward(x, ad::Mode::eval), 0), row(m.forward(x, ad::Mode::eval), 0));
}

TEST(Model, GoldenLogitsBitForBit) {
    std::ifstream in(std::string(LULC_TEST_DATA_DIR) + "/tiny_logits.json");
    ASSERT_TRUE(in) << "missing golden file";
    const auto doc = nlohmann::json::parse(in);
    const auto c = vit::vit_config_from_json(doc.at("model"));
    VisionTransformer<float> m(c, doc.at("model_seed").get<std::uint64_t>());
    const auto logits = m.forward(testkit::golden_input(c), ad::Mode::eval);
    const auto expected = doc.at("logits").get<std::vector<std::string>>();
    ASSERT_EQ(expected.size(), logits.numel());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(testkit::hex_float(logits.at(i)), expected[i]) << i;
}

TEST(Model, CastAndCloneAreDeep) {
    VisionTransformer<float> m(ViTConfig::tiny(), 4);
    auto copy = m.clone();
    std::vector<float> zeros(10, 0.f);
    copy.assign("head.bias", zeros);
    copy.assign("head.bias", std::vector<float>(10, 1.f));
    EXPECT_EQ(m.find_parameter("head.bias")->at(0), 0.f);
    auto d = m.cast<double>();
    EXPECT_EQ(static_cast<float>(d.find_parameter("pos_embed")->at(7)), m.find_parameter("pos_embed")->at(7));
    EXPECT_THROW(copy.assign("head.bias", std::vector<float>(3)), ShapeError);
    EXPECT_THROW(copy.assign("nope", std::vector<float>(3)), ConfigError);
}

TEST(Model, ResetHeadTouchesOnlyHead) {
    VisionTransformer<float> m(ViTConfig::tiny(), 4);
    const auto before = m.clone();
    m.reset_head(99);
    for (const auto& [name, p] : m.named_parameters()) {
        const auto q = before.find_parameter(name)->values();
        const bool same = std::equal(p.values().begin(), p.values().end(), q.begin());
        if (name == "head.weight") EXPECT_FALSE(same);
        else EXPECT_TRUE(same) << name;
    }
}

TEST(PositionTable, SameGridIsIdentity) {
    std::vector<double> table = iota_values(5 * 3);
    EXPECT_EQ(vit::interpolate_position_table<double>(table, 3, 2, 2), table);
}

TEST(PositionTable, UpsamplingKeepsClassRowAndConstants) {
    // Class row 0..2, grid rows all equal -> every resampled grid row equal.
    std::vector<double> table = {7, 8, 9};
    for (int i = 0; i < 4; ++i) table.insert(table.end(), {1.0, 2.0, 3.0});
    auto out = vit::interpolate_position_table<double>(table, 3, 2, 4);
    ASSERT_EQ(out.size(), 17u * 3);
    EXPECT_EQ((std::vector<double>(out.begin(), out.begin() + 3)), (std::vector<double>{7, 8, 9}));
    for (std::size_t r = 1; r < 17; ++r)
        for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(out[r * 3 + d], static_cast<double>(d + 1), 1e-12);
}

TEST(PositionTable, BilinearHalfPixelValues) {
    // 2x2 grid (one channel) values 0,1,2,3 upsampled to 4x4: half-pixel
    // centres sample at source coords -0.25, 0.25, 0.75, 1.25 (clamped).
    std::vector<double> table = {0, 0, 1, 2, 3};
    auto out = vit::interpolate_position_table<double>(table, 1, 2, 4);
    const double expected_row0[4] = {0.0, 0.25, 0.75, 1.0};
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(out[1 + x], expected_row0[x], 1e-12);
    EXPECT_NEAR(out[1 + 5], 0.25 * 2 + 0.25, 1e-12);  // row 1 col 1: y=0.25, x=0.25
}

TEST(Gradients, TinyModelAgreesWithFiniteDifferencesIn64Bit) {
    // Spot check of a few coordinates per tensor; the full sweep lives in the
    // gradcheck tests.
    const auto c = ViTConfig::tiny();
    VisionTransformer<double> m(c, 6);
    auto x = random_batch(c, 2, 7).cast<double>();
    auto loss_of = [&](const VisionTransformer<double>& model) {
        auto logits = model.forward(x, ad::Mode::eval);
        return ad::mean(ad::mul(logits, logits));
    };
    ad::backward(loss_of(m));
    ad::NoGradGuard guard;
    for (auto [name, p] : m.named_parameters()) {
        auto vals = p.mutable_values();
        for (std::size_t i : {std::size_t{0}, vals.size() / 2, vals.size() - 1}) {
            const double orig = vals[i];
            vals[i] = orig + 1e-5;
            const double plus = loss_of(m).item();
            vals[i] = orig - 1e-5;
            const double minus = loss_of(m).item();
            vals[i] = orig;
            const double fd = (plus - minus) / 2e-5;
            EXPECT_NEAR(p.grad()[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << name << "[" << i << "]";
        }
    }
}
