#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "adamat/synth.hpp"

using namespace adamat;
using namespace adamat::synth;

namespace {

SampleRecord random_record(std::uint64_t seed, std::size_t size = 32, int radius = 2) {
    Rng rng(seed);
    auto fg = gen_foreground(seed % 2 ? ForegroundKind::kStrands : ForegroundKind::kDisc, size, size, rng);
    const ImageRGB bg = gen_background(size, size, {}, rng);
    return make_sample(fg.fg, fg.alpha, bg, {radius, radius});
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Disc, RampValues) {
    Rng rng(0);
    DiscParams p;
    p.center_y = p.center_x = 32;
    p.r_inner = 10;
    p.r_outer = 20;
    const auto f = gen_disc(64, 64, p, rng);
    EXPECT_EQ(f.alpha.at(32, 32), 1.0f);
    EXPECT_EQ(f.alpha.at(32, 52), 0.0f);  // dist == r_outer
    EXPECT_EQ(f.alpha.at(32, 47), 0.5f);  // midpoint of the ramp
    EXPECT_EQ(f.alpha.at(32, 42), 1.0f);  // dist == r_inner
    for (float v : f.fg.data()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);

    p.r_inner = 20;
    EXPECT_THROW(gen_disc(64, 64, p, rng), std::invalid_argument);
    p.r_inner = 0;
    EXPECT_THROW(gen_disc(64, 64, p, rng), std::invalid_argument);
}

TEST(Strands, HaveSoftAndOpaquePixels) {
    Rng rng(3);
    const auto f = gen_foreground(ForegroundKind::kStrands, 64, 64, rng);
    std::size_t opaque = 0, soft = 0;
    for (float a : f.alpha.values()) {
        ASSERT_TRUE(a >= 0.0f && a <= 1.0f);
        opaque += a == 1.0f;
        soft += a > 0.0f && a < 1.0f;
    }
    EXPECT_GT(opaque, 0u);
    EXPECT_GT(soft, 50u);
}

TEST(MakeSample, ZeroRadiiGivesOptimalTrimap) {
    Rng rng(1);
    auto fg = gen_foreground(ForegroundKind::kDisc, 32, 32, rng);
    const ImageRGB bg = gen_background(32, 32, {}, rng);
    const auto s = make_sample(fg.fg, fg.alpha, bg, {0, 0});
    EXPECT_EQ(s.trimap_in, derive_optimal_trimap(fg.alpha));

    const auto opaque = make_sample(fg.fg, AlphaMatte(32, 32, 1.0f), bg, {0, 0});
    EXPECT_EQ(opaque.image, fg.fg);
    EXPECT_EQ(opaque.trimap_in.count(Label::kForeground), 32u * 32u);

    EXPECT_THROW(make_sample(fg.fg, AlphaMatte(31, 32), bg, {0, 0}), ShapeError);
}

TEST(MakeSample, CompositeRecomputesBitIdentically) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = random_record(seed);
        ImageRGB expected(32, 32);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < 32; ++y) {
                for (std::size_t x = 0; x < 32; ++x) {
                    const float a = s.alpha_gt.at(y, x);
                    expected.at(c, y, x) = std::clamp(a * s.fg.at(c, y, x) + (1.0f - a) * s.bg.at(c, y, x), 0.0f, 1.0f);
                }
            }
        }
        ASSERT_EQ(s.image, expected);
    }
}

TEST(Crop, FullSizeIsWholeImage) {
    Rng rng(2);
    const auto s = random_record(5);
    const auto c = crop_on_unknown(s, 32, 32, rng);
    EXPECT_EQ(c.image, s.image);
    EXPECT_EQ(c.alpha_gt, s.alpha_gt);
    EXPECT_EQ(c.trimap_in, s.trimap_in);
}

TEST(Crop, SingleUnknownPixelIsCentered) {
    SampleRecord s = random_record(6, 64);
    s.trimap_in = Trimap(64, 64, Label::kBackground);
    s.trimap_in.at(32, 32) = Label::kUnknown;
    Rng rng(0);
    const auto c = crop_on_unknown(s, 32, 32, rng);
    EXPECT_EQ(c.meta["crop_center"], nlohmann::json({32, 32}));
    EXPECT_EQ(c.meta["crop_window"][0], 16);
    EXPECT_EQ(c.meta["crop_window"][1], 16);
    EXPECT_EQ(c.trimap_in.at(16, 16), Label::kUnknown);
    EXPECT_FALSE(c.meta["crop_fallback"].get<bool>());
}

TEST(Crop, WindowClampedAtBorderAndFallback) {
    SampleRecord s = random_record(7, 64);
    s.trimap_in = Trimap(64, 64, Label::kForeground);
    s.trimap_in.at(1, 62) = Label::kUnknown;
    Rng rng(0);
    const auto c = crop_on_unknown(s, 20, 20, rng);
    EXPECT_EQ(c.meta["crop_window"][0], 0);
    EXPECT_EQ(c.meta["crop_window"][1], 44);

    s.trimap_in = Trimap(64, 64, Label::kForeground);
    const auto f = crop_on_unknown(s, 20, 20, rng);
    EXPECT_TRUE(f.meta["crop_fallback"].get<bool>());
    EXPECT_THROW(crop_on_unknown(s, 65, 20, rng), std::invalid_argument);
}

TEST(Crop, CentersAreUniformOverUnknownPixels) {
    SampleRecord s = random_record(8, 32);
    s.trimap_in = Trimap(32, 32, Label::kBackground);
    std::vector<std::pair<int, int>> cells;
    for (int k = 0; k < 20; ++k) {
        const int y = (k * 7) % 32, x = (k * 13 + 3) % 32;
        s.trimap_in.at(std::size_t(y), std::size_t(x)) = Label::kUnknown;
    }
    const std::size_t n_unknown = s.trimap_in.count(Label::kUnknown);
    ASSERT_EQ(n_unknown, 20u);

    Rng rng(99);
    std::map<std::pair<int, int>, int> freq;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto c = crop_on_unknown(s, 8, 8, rng);
        const int y = c.meta["crop_center"][0], x = c.meta["crop_center"][1];
        ASSERT_EQ(s.trimap_in.at(std::size_t(y), std::size_t(x)), Label::kUnknown);
        ++freq[{y, x}];
    }
    ASSERT_EQ(freq.size(), n_unknown);
    const double expected = double(draws) / double(n_unknown);
    double chi2 = 0;
    for (const auto& [cell, n] : freq) chi2 += (n - expected) * (n - expected) / expected;
    EXPECT_LT(chi2, 43.82);  // 19 degrees of freedom, p = 0.001
}

TEST(Crop, ResizeKeepsLabelsAndRange) {
    Rng rng(4);
    const auto s = random_record(9, 64, 3);
    for (int i = 0; i < 20; ++i) {
        const auto c = crop_on_unknown(s, 48, 24, rng);
        ASSERT_EQ(c.alpha_gt.height(), 24u);
        for (float a : c.alpha_gt.values()) ASSERT_TRUE(a >= 0.0f && a <= 1.0f);
        for (auto l : c.trimap_in.values()) ASSERT_LE(std::uint8_t(l), 2);
        ASSERT_EQ(c.image, composite(c.fg, c.bg, c.alpha_gt));
    }
}

TEST(Augment, DisabledIsIdentity) {
    Rng rng(1);
    const auto s = random_record(10);
    const auto a = augment(s, AugmentConfig::disabled(32), rng);
    EXPECT_EQ(a.image, s.image);
    EXPECT_EQ(a.alpha_gt, s.alpha_gt);
    EXPECT_EQ(a.trimap_in, s.trimap_in);
}

TEST(Augment, DoubleFlipIsIdentity) {
    Rng rng(1);
    const auto s = random_record(11);
    AugmentConfig cfg = AugmentConfig::disabled(32);
    cfg.flip_prob = 1;
    const auto once = augment(s, cfg, rng);
    EXPECT_NE(once.alpha_gt, s.alpha_gt);
    EXPECT_EQ(once.alpha_gt.at(3, 0), s.alpha_gt.at(3, 31));
    const auto twice = augment(once, cfg, rng);
    EXPECT_EQ(twice.image, s.image);
    EXPECT_EQ(twice.alpha_gt, s.alpha_gt);
    EXPECT_EQ(twice.trimap_in, s.trimap_in);
}

TEST(Augment, ZeroRotationUnitScaleWarpIsIdentity) {
    const auto s = random_record(12);
    const auto w = warp(s, false, 1.0f, 0.0f);
    for (std::size_t i = 0; i < s.alpha_gt.size(); ++i) ASSERT_NEAR(w.alpha_gt[i], s.alpha_gt[i], 1e-6f);
    for (std::size_t i = 0; i < s.image.data().size(); ++i) ASSERT_NEAR(w.image.data()[i], s.image.data()[i], 1e-6f);
    EXPECT_EQ(w.trimap_in, s.trimap_in);
}

TEST(Augment, RandomOutputsStayValid) {
    Rng rng(21);
    AugmentConfig cfg;
    cfg.crop_min = cfg.crop_max = cfg.out_size = 32;
    for (int i = 0; i < 30; ++i) {
        const auto a = augment(random_record(100 + std::uint64_t(i)), cfg, rng);
        for (float v : a.alpha_gt.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
        for (auto l : a.trimap_in.values()) ASSERT_LE(std::uint8_t(l), 2);
        ASSERT_EQ(a.image, composite(a.fg, a.bg, a.alpha_gt));
    }
    cfg.scale_min = 2;
    EXPECT_THROW(augment(random_record(1), cfg, rng), std::invalid_argument);
}

TEST(Dataset, QuantizedCompositeConsistency) {
    DatasetConfig cfg;
    cfg.count = 8;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        const auto s = generate_sample(cfg, i);
        const ImageRGB exact = composite(s.fg, s.bg, s.alpha_gt);
        for (std::size_t k = 0; k < exact.data().size(); ++k) {
            ASSERT_LE(std::abs(exact.data()[k] - s.image.data()[k]), 0.5f / 255.0f + 1e-6f);
        }
        const Trimap opt = derive_optimal_trimap(s.alpha_gt);
        for (std::size_t k = 0; k < opt.size(); ++k) {
            ASSERT_TRUE(opt[k] != Label::kUnknown || s.trimap_in[k] == Label::kUnknown);
        }
    }
}

TEST(Dataset, WriteIsDeterministicAndLoadsBack) {
    const auto root = std::filesystem::temp_directory_path() / "adamat_synth_test";
    std::filesystem::remove_all(root);
    DatasetConfig cfg;
    cfg.count = 4;
    cfg.seed = 77;
    write_dataset(root / "a", cfg);
    write_dataset(root / "b", cfg);
    for (const auto& entry : std::filesystem::directory_iterator(root / "a")) {
        const auto name = entry.path().filename();
        ASSERT_EQ(slurp(entry.path()), slurp(root / "b" / name)) << name;
    }
    EXPECT_TRUE(std::filesystem::exists(root / "a" / "0003_trimap.pgm"));

    const auto loaded = load_dataset(root / "a");
    ASSERT_EQ(loaded.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto s = generate_sample(cfg, i);
        EXPECT_EQ(loaded[i].alpha_gt, s.alpha_gt);
        EXPECT_EQ(loaded[i].image, s.image);
        EXPECT_EQ(loaded[i].trimap_in, s.trimap_in);
        EXPECT_EQ(loaded[i].meta["seed"], s.meta["seed"]);
    }

    cfg.seed = 78;
    EXPECT_NE(generate_sample(cfg, 0).alpha_gt, loaded[0].alpha_gt);
    std::filesystem::remove_all(root);
}
