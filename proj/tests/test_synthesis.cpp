#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "nucd/errors.hpp"
#include "nucd/synthesis.hpp"

using namespace nucd;

namespace {

double recompute_field(const CoeffVector& c, int x, int y, int w, int h) {
  const double xx = 2.0 * x / (w - 1) - 1.0;
  const double yy = 2.0 * y / (h - 1) - 1.0;
  double sum = 0.0;
  for (int t = 0; t <= c.degree(); ++t) {
    for (int s = 0; s + t <= c.degree(); ++s) sum += c.at(t, s) * std::pow(xx, t) * std::pow(yy, s);
  }
  return sum;
}

SceneConfig small_flat_config() {
  SceneConfig config;
  config.width = 160;
  config.height = 128;
  config.background_mix = {1, 0, 0, 0};
  return config;
}

}  // namespace

TEST(Degradation, ZeroSeverityReturnsClear) {
  const GrayImage clear = make_background(BackgroundKind::kCloudNoise, 4, 64, 48);
  const CoeffVector c = sample_coeffs(4, 3, AmplitudeSpec::defaults());
  EXPECT_EQ(synthesize_degraded(clear, c, 0.0), clear);
}

TEST(Degradation, ConstantFieldOnBlackImage) {
  CoeffVector c(3);
  c.at(0, 0) = 0.05;
  const GrayImage y = synthesize_degraded(GrayImage(20, 10, 0.0), c, 10.0);
  for (double v : y.pixels()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Degradation, DifferenceIsScaledField) {
  const int w = 64, h = 40;
  const GrayImage clear = make_background(BackgroundKind::kGradient, 7, w, h);
  AmplitudeSpec spec = AmplitudeSpec::defaults();
  spec.zero_mean = false;
  const CoeffVector c = sample_coeffs(11, 3, spec);
  const GrayImage y = synthesize_degraded(clear, c, 10.0);
  for (int yy = 0; yy < h; ++yy) {
    for (int x = 0; x < w; ++x) {
      EXPECT_NEAR(y(x, yy) - clear(x, yy), 10.0 * recompute_field(c, x, yy, w, h), 1e-12);
    }
  }
}

TEST(Degradation, NotClamped) {
  CoeffVector c(2);
  c.at(0, 0) = 0.2;
  const GrayImage y = synthesize_degraded(GrayImage(4, 4, 0.9), c, 10.0);
  EXPECT_NEAR(y.max(), 2.9, 1e-15);
}

TEST(Background, FlatIsConstant) {
  const GrayImage bg = make_background(BackgroundKind::kFlat, 123, 32, 16);
  for (double v : bg.pixels()) EXPECT_EQ(v, 0.3);
}

TEST(Background, GradientRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GrayImage bg = make_background(BackgroundKind::kGradient, seed, 50, 40);
    EXPECT_GE(bg.min(), 0.2 - 1e-12);
    EXPECT_LE(bg.max(), 0.5 + 1e-12);
  }
}

TEST(Background, DeterministicPerSeed) {
  for (BackgroundKind kind : {BackgroundKind::kGradient, BackgroundKind::kCloudNoise,
                              BackgroundKind::kStructured}) {
    const GrayImage a = make_background(kind, 42, 96, 80);
    EXPECT_EQ(a, make_background(kind, 42, 96, 80)) << to_string(kind);
    EXPECT_NE(a, make_background(kind, 43, 96, 80)) << to_string(kind);
  }
}

TEST(Background, CloudNoiseStaysInUnitRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GrayImage bg = make_background(BackgroundKind::kCloudNoise, seed, 160, 128);
    EXPECT_GE(bg.min(), 0.0);
    EXPECT_LE(bg.max(), 1.0);
  }
}

TEST(Background, NamesRoundTrip) {
  for (BackgroundKind kind : {BackgroundKind::kFlat, BackgroundKind::kGradient,
                              BackgroundKind::kCloudNoise, BackgroundKind::kStructured}) {
    EXPECT_EQ(background_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_THROW(background_kind_from_string("sky"), ParameterError);
}

TEST(InjectTarget, PeakRisesByContrast) {
  const GrayImage bg(64, 64, 0.3);
  const auto [img, box] = inject_target(bg, 30, 31, 4.0, 0.2);
  EXPECT_NEAR(img(30, 31) - bg(30, 31), 0.2, 1e-15);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(img.pixels()[i] - 0.3, 0.2 + 1e-15);
}

TEST(InjectTarget, RadiusFourGivesSideTen) {
  const auto [img, box] = inject_target(GrayImage(64, 64, 0.3), 30, 30, 4.0, 0.2);
  EXPECT_EQ(box.w, 10);
  EXPECT_EQ(box.h, 10);
  EXPECT_EQ(box.x, 25);
  EXPECT_EQ(box.y, 25);
}

TEST(InjectTarget, BoxBoundsTenPercentContour) {
  const double contrast = 0.25;
  const GrayImage bg(80, 80, 0.0);
  for (double radius : {1.0, 2.5, 4.0, 7.3, 12.0}) {
    const auto [img, box] = inject_target(bg, 40, 40, radius, contrast);
    for (int y = 0; y < 80; ++y) {
      for (int x = 0; x < 80; ++x) {
        const bool inside = x >= box.x && x <= box.x + box.w && y >= box.y && y <= box.y + box.h;
        if (!inside) EXPECT_LT(img(x, y), 0.1 * contrast) << radius << " " << x << "," << y;
      }
    }
  }
}

TEST(InjectTarget, NegativeContrastIsDarkTarget) {
  const auto [img, box] = inject_target(GrayImage(32, 32, 0.5), 16, 16, 3.0, -0.1);
  EXPECT_NEAR(img(16, 16), 0.4, 1e-15);
}

TEST(InjectTarget, RejectsDegenerateInput) {
  const GrayImage bg(32, 32, 0.3);
  EXPECT_THROW(inject_target(bg, 16, 16, 4.0, 0.0), ParameterError);
  EXPECT_THROW(inject_target(bg, 2, 16, 4.0, 0.1), ParameterError);
  EXPECT_THROW(inject_target(bg, 16, 30, 4.0, 0.1), ParameterError);
  EXPECT_THROW(inject_target(bg, 16, 16, 0.0, 0.1), ParameterError);
}

TEST(RadiusForSide, InvertsHalfExtent) {
  for (int side = 2; side < 40; side += 2) {
    EXPECT_EQ(2 * target_half_extent(radius_for_side(side)), side);
  }
  EXPECT_THROW(radius_for_side(7), ParameterError);
}

TEST(MakeScene, DeterministicAndDegradedConsistent) {
  SceneConfig config;
  config.width = 128;
  config.height = 96;
  const SceneRecord a = make_scene(config, 5);
  const SceneRecord b = make_scene(config, 5);
  EXPECT_EQ(a.clear, b.clear);
  EXPECT_EQ(a.degraded, b.degraded);
  EXPECT_EQ(a.coeffs, b.coeffs);
  EXPECT_EQ(a.annotations, b.annotations);
  EXPECT_EQ(a.degraded, synthesize_degraded(a.clear, a.coeffs, config.k, config.coord));
  EXPECT_GE(a.clear.min(), 0.0);
  EXPECT_LE(a.clear.max(), 1.0);
  EXPECT_NE(make_scene(config, 6).degraded, a.degraded);
}

TEST(MakeScene, AnnotationsAreValidAndCounted) {
  SceneConfig config = small_flat_config();
  config.min_targets = 2;
  config.max_targets = 4;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SceneRecord r = make_scene(config, seed);
    EXPECT_LE(r.annotations.size(), 4u);
    EXPECT_GE(r.annotations.size(), 1u);
    for (const BBox& box : r.annotations) {
      EXPECT_TRUE(box.valid_in(config.width, config.height));
      EXPECT_EQ(box.w, box.h);
      EXPECT_GE(box.w, kScaleBinEdges.front());
      EXPECT_LT(box.w, kScaleBinEdges.back());
    }
  }
}

TEST(MakeScene, ScaleBinProportionsFollowMix) {
  SceneConfig config = small_flat_config();
  config.min_targets = 3;
  config.max_targets = 3;
  std::array<long, 4> counts{};
  long total = 0;
  for (std::uint64_t seed = 0; total < 1500; ++seed) {
    for (const BBox& box : make_scene(config, seed).annotations) {
      for (std::size_t b = 0; b < 4; ++b) {
        if (box.w >= kScaleBinEdges[b] && box.w < kScaleBinEdges[b + 1]) ++counts[b];
      }
      ++total;
    }
  }
  double mix_total = 0.0;
  for (double m : config.scale_mix) mix_total += m;
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_NEAR(static_cast<double>(counts[b]) / total, config.scale_mix[b] / mix_total, 0.05)
        << "bin " << b;
  }
}

TEST(MakeScene, RejectsBadConfig) {
  SceneConfig config = small_flat_config();
  config.k = -1.0;
  EXPECT_THROW(make_scene(config, 0), ParameterError);
  config = small_flat_config();
  config.min_contrast = 0.0;
  EXPECT_THROW(make_scene(config, 0), ParameterError);
  config = small_flat_config();
  config.max_targets = 0;
  config.min_targets = 1;
  EXPECT_THROW(make_scene(config, 0), ParameterError);
}

TEST(SceneSeed, DistinctPerIndex) {
  EXPECT_NE(scene_seed(0, 0), scene_seed(0, 1));
  EXPECT_NE(scene_seed(0, 1), scene_seed(1, 0));
  EXPECT_EQ(scene_seed(3, 9), scene_seed(3, 9));
}
