#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "lulc/error.hpp"
#include "lulc/io/archive.hpp"
#include "lulc/io/checkpoint.hpp"
#include "lulc/train/optimizer.hpp"
#include "support.hpp"

using namespace lulc;
using namespace lulc::io;
using vit::VisionTransformer;
using vit::ViTConfig;

namespace {

ad::Tensor<float> fixed_input(const ViTConfig& c) {
    Rng rng(31);
    std::vector<float> v(2 * 3 * c.image_size * c.image_size);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return ad::Tensor<float>::from_values({2, 3, c.image_size, c.image_size}, std::move(v));
}

bool bitwise_equal(std::span<const float> a, std::span<const float> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::string header_of(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
    return std::string(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
}

// Replaces `from` with the same-length `to` inside the JSON header.
std::vector<std::uint8_t> patch_header(std::vector<std::uint8_t> bytes, const std::string& from, const std::string& to) {
    EXPECT_EQ(from.size(), to.size());
    const std::string header = header_of(bytes);
    const auto pos = header.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    std::memcpy(bytes.data() + 16 + pos, to.data(), to.size());
    return bytes;
}

}  // namespace

TEST(Archive, LayoutStartsWithMagicAndJsonHeader) {
    TensorArchive a;
    const std::vector<float> v = {1.f, 2.f, 3.f};
    a.put<float>("x", {3}, v);
    a.metadata()["note"] = "hi";
    const auto bytes = a.serialize();
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "VITLULC1");
    const auto header = nlohmann::json::parse(header_of(bytes));
    EXPECT_EQ(header.at("format_version"), 1);
    EXPECT_EQ(header.at("tensors").at("x").at("dtype"), "f32");
    EXPECT_EQ(header.at("tensors").at("x").at("shape"), nlohmann::json::array({3}));
    EXPECT_EQ(header.at("tensors").at("x").at("nbytes"), 12);
    EXPECT_EQ(header.at("metadata").at("note"), "hi");
    EXPECT_EQ(bytes.size(), 16 + header_of(bytes).size() + 12);
    float first;
    std::memcpy(&first, bytes.data() + 16 + header_of(bytes).size(), 4);
    EXPECT_EQ(first, 1.f);
}

TEST(Archive, RoundTripBothDtypes) {
    TensorArchive a;
    const std::vector<float> f = {0.1f, -3.5f, 1e-30f, 7.f};
    const std::vector<double> d = {0.1, -1e300, 2.5};
    a.put<float>("f", {2, 2}, f);
    a.put<double>("d", {3}, d);
    const auto b = TensorArchive::parse(a.serialize());
    EXPECT_EQ(b.names(), a.names());
    EXPECT_EQ(b.at("f").values<float>(), f);
    EXPECT_EQ(b.at("d").values<double>(), d);
    EXPECT_EQ(b.at("d").dtype, DType::f64);
    EXPECT_THROW(a.at("missing"), ConfigError);
}

TEST(Archive, CorruptLengthFieldIsRejected) {
    TensorArchive a;
    const std::vector<float> v(32, 1.f);
    a.put<float>("w", {32}, v);
    const auto good = a.serialize();
    EXPECT_NO_THROW(TensorArchive::parse(good));
    EXPECT_THROW(TensorArchive::parse(patch_header(good, "\"nbytes\":128", "\"nbytes\":129")), IntegrityError);
}

TEST(Archive, OtherCorruptions) {
    TensorArchive a;
    const std::vector<float> v(4, 1.f);
    a.put<float>("a", {4}, v);
    a.put<float>("b", {4}, v);
    const auto good = a.serialize();
    auto bad_magic = good;
    bad_magic[3] = 'X';
    EXPECT_THROW(TensorArchive::parse(bad_magic), IntegrityError);
    auto truncated = good;
    truncated.resize(truncated.size() - 1);
    EXPECT_THROW(TensorArchive::parse(truncated), IntegrityError);
    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(TensorArchive::parse(trailing), IntegrityError);
    EXPECT_THROW(TensorArchive::parse(patch_header(good, "\"offset\":16", "\"offset\":00")), IntegrityError);
    EXPECT_THROW(TensorArchive::parse(patch_header(good, "\"f32\"", "\"i32\"")), IntegrityError);
    EXPECT_THROW(TensorArchive::parse(patch_header(good, "\"format_version\":1", "\"format_version\":2")),
                 IntegrityError);
    auto huge = good;
    huge[15] = 0x7f;
    EXPECT_THROW(TensorArchive::parse(huge), IntegrityError);
    testkit::TempDir dir;
    EXPECT_THROW(TensorArchive::load(dir / "absent.vitlulc"), IoError);
}

TEST(Checkpoint, SaveLoadIsBitwiseIdentity) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<float> m(c, 12);
    testkit::TempDir dir;
    save_checkpoint(m, dir / "m.vitlulc");
    const auto back = load_checkpoint<float>(dir / "m.vitlulc", c);
    for (const auto& [name, p] : m.named_parameters()) {
        EXPECT_TRUE(bitwise_equal(p.values(), back.find_parameter(name)->values())) << name;
    }
    const auto x = fixed_input(c);
    EXPECT_TRUE(bitwise_equal(m.forward(x, ad::Mode::eval).values(), back.forward(x, ad::Mode::eval).values()));
    EXPECT_EQ(archive_config(TensorArchive::load(dir / "m.vitlulc"))->embed_dim, 32u);
}

TEST(Checkpoint, OptimizerStateAddsTwoTensorsPerParameterPlusStep) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<float> m(c, 12);
    auto params = m.parameters();
    auto state = train::AdamState<float>::for_params(params);
    state.step = 7;
    state.m[0][0] = 0.25f;
    const auto with = to_archive(m, &state);
    const auto without = to_archive(m);
    EXPECT_EQ(with.size(), without.size() + 2 * params.size() + 1);
    EXPECT_TRUE(with.contains("opt.patch_embed.weight.m"));
    EXPECT_TRUE(with.contains("opt.head.bias.v"));
    EXPECT_TRUE(with.contains("opt.step"));
    const auto restored = adam_state_from_archive(TensorArchive::parse(with.serialize()), m);
    EXPECT_EQ(restored.step, 7u);
    EXPECT_EQ(restored.m[0][0], 0.25f);
    // A strict load ignores optimizer tensors.
    EXPECT_NO_THROW(from_archive<float>(with, c));
}

TEST(Checkpoint, StrictRejectsMissingAndUnknown) {
    const auto c = ViTConfig::tiny();
    VisionTransformer<float> m(c, 1);
    auto a = to_archive(m);
    for (const auto& [name, p] : m.named_parameters()) {
        if (name.rfind("blocks.1.", 0) == 0) a.erase(name);
    }
    try {
        from_archive<float>(a, c);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("blocks.1.attn.q.weight"), std::string::npos);
        EXPECT_NE(msg.find("blocks.1.mlp.fc2.bias"), std::string::npos);
    }
    auto extra = to_archive(m);
    const std::vector<float> v = {1.f};
    extra.put<float>("stray", {1}, v);
    EXPECT_THROW(from_archive<float>(extra, c), ConfigError);
    LoadReport report;
    EXPECT_NO_THROW(from_archive<float>(extra, c, {false, 0}, &report));
    EXPECT_EQ(report.ignored, std::vector<std::string>{"stray"});
}

TEST(Checkpoint, NonStrictReplacesOnlyTheHead) {
    auto big = ViTConfig::tiny();
    big.num_classes = 21843;
    VisionTransformer<float> source(big, 3);
    const auto archive = to_archive(source);
    const auto c = ViTConfig::tiny();
    EXPECT_THROW(from_archive<float>(archive, c), ConfigError);
    LoadReport report;
    const auto m = from_archive<float>(archive, c, {false, 5}, &report);
    EXPECT_EQ(report.reinitialized, (std::vector<std::string>{"head.weight", "head.bias"}));
    // Name-diff oracle: every archive tensor except head.* is imported verbatim.
    std::vector<std::string> expected;
    for (const auto& name : archive.names()) {
        if (name.rfind("head.", 0) != 0) expected.push_back(name);
    }
    auto imported = report.imported;
    std::sort(imported.begin(), imported.end());
    EXPECT_EQ(imported, expected);
    for (const auto& name : expected) {
        EXPECT_TRUE(bitwise_equal(m.find_parameter(name)->values(), source.find_parameter(name)->values())) << name;
    }
    EXPECT_EQ(m.find_parameter("head.weight")->shape(), (ad::Shape{32, 10}));
    for (float b : m.find_parameter("head.bias")->values()) EXPECT_EQ(b, 0.f);
}

TEST(Checkpoint, NonStrictInterpolatesPositionTable) {
    auto small = ViTConfig::tiny();
    VisionTransformer<float> source(small, 3);
    auto large = small;
    large.image_size = 32;
    LoadReport report;
    const auto m = from_archive<float>(to_archive(source), large, {false, 0}, &report);
    EXPECT_EQ(report.interpolated, std::vector<std::string>{"pos_embed"});
    EXPECT_TRUE(report.reinitialized.empty());
    EXPECT_EQ(m.find_parameter("pos_embed")->shape(), (ad::Shape{17, 32}));
    const auto expected = vit::interpolate_position_table<float>(source.find_parameter("pos_embed")->values(), 32, 2, 4);
    EXPECT_TRUE(bitwise_equal(m.find_parameter("pos_embed")->values(), expected));
    EXPECT_THROW(from_archive<float>(to_archive(source), large), ConfigError);
}

TEST(Checkpoint, MismatchedWidthNamesFirstOffender) {
    auto wide = ViTConfig::tiny();
    wide.embed_dim = 64;
    VisionTransformer<float> source(wide, 3);
    try {
        from_archive<float>(to_archive(source), ViTConfig::tiny(), {false, 0});
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_EQ(msg.find("incompatible tensor shapes: patch_embed.weight"), 0u) << msg;
    }
}

TEST(Checkpoint, DoubleArchiveLoadsIntoFloatModel) {
    VisionTransformer<double> d(ViTConfig::tiny(), 8);
    const auto f = from_archive<float>(to_archive(d), ViTConfig::tiny());
    EXPECT_EQ(f.find_parameter("pos_embed")->at(3), static_cast<float>(d.find_parameter("pos_embed")->at(3)));
}
