#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nucd/errors.hpp"
#include "nucd/losses.hpp"

using namespace nucd;

namespace {

constexpr int kStageW[4] = {32, 16, 8, 4};
constexpr int kStageH[4] = {24, 12, 6, 3};

BinaryMask random_mask(int w, int h, unsigned seed) {
  std::mt19937 gen(seed);
  std::bernoulli_distribution b(0.3);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, b(gen));
  }
  return m;
}

FeatureMap random_map(int w, int h, unsigned seed, double lo, double hi) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureMap f(w, h);
  for (double& v : f.pixels()) v = u(gen);
  return f;
}

FeatureStack random_stack(unsigned seed, double lo, double hi) {
  return {random_map(kStageW[0], kStageH[0], seed, lo, hi),
          random_map(kStageW[1], kStageH[1], seed + 1, lo, hi),
          random_map(kStageW[2], kStageH[2], seed + 2, lo, hi),
          random_map(kStageW[3], kStageH[3], seed + 3, lo, hi)};
}

FeatureStack constant_stack(double v) {
  return {FeatureMap(kStageW[0], kStageH[0], v), FeatureMap(kStageW[1], kStageH[1], v),
          FeatureMap(kStageW[2], kStageH[2], v), FeatureMap(kStageW[3], kStageH[3], v)};
}

FeatureMap mask_as_map(const BinaryMask& m) {
  FeatureMap f(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) f(x, y) = m(x, y) ? 1.0 : 0.0;
  }
  return f;
}

FeatureMap negated(const FeatureMap& f) {
  FeatureMap out = f;
  for (double& v : out.pixels()) v = -v;
  return out;
}

double bce_reference(const BinaryMask& m, const FeatureMap& f) {
  double sum = 0.0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const double p = std::clamp(f(x, y), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
      sum += m(x, y) ? -std::log(p) : -std::log(1.0 - p);
    }
  }
  return sum / (m.width() * m.height());
}

// Max-pooling over the preimage [floor(i*W/w), ceil((i+1)*W/w)).
BinaryMask resize_reference(const BinaryMask& m, int w, int h) {
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = x * m.width() / w, x1 = ((x + 1) * m.width() + w - 1) / w;
      const int y0 = y * m.height() / h, y1 = ((y + 1) * m.height() + h - 1) / h;
      bool any = false;
      for (int sy = y0; sy < y1; ++sy) {
        for (int sx = x0; sx < x1; ++sx) any = any || m(sx, sy);
      }
      out.set(x, y, any);
    }
  }
  return out;
}

}  // namespace

TEST(MakeMask, EmptyFullAndUnion) {
  EXPECT_EQ(make_mask({}, 10, 8).popcount(), 0u);
  const std::vector<BBox> full = {BBox{0, 0, 10, 8}};
  EXPECT_EQ(make_mask(full, 10, 8).popcount(), 80u);
  const std::vector<BBox> overlap = {BBox{1, 1, 4, 4}, BBox{3, 3, 4, 4}};
  const BinaryMask m = make_mask(overlap, 10, 8);
  EXPECT_EQ(m.popcount(), 16u + 16u - 4u);
  EXPECT_TRUE(m(3, 3));
  EXPECT_TRUE(m(6, 6));
  EXPECT_FALSE(m(0, 0));
  EXPECT_FALSE(m(7, 7));
}

TEST(ResizeMask, Examples) {
  const BinaryMask m = random_mask(9, 7, 1);
  EXPECT_EQ(resize_mask(m, 9, 7), m);
  EXPECT_EQ(resize_mask(BinaryMask(2, 2), 1, 1).popcount(), 0u);
  BinaryMask one(2, 2);
  one.set(1, 0, true);
  EXPECT_TRUE(resize_mask(one, 1, 1)(0, 0));
}

TEST(ResizeMask, MatchesPreimageMaxPool) {
  const BinaryMask m = random_mask(37, 23, 2);
  for (auto [w, h] : {std::pair{18, 11}, std::pair{5, 3}, std::pair{37, 1}, std::pair{10, 23}}) {
    EXPECT_EQ(resize_mask(m, w, h), resize_reference(m, w, h)) << w << "x" << h;
  }
  EXPECT_THROW(resize_mask(m, 0, 3), ParameterError);
}

TEST(TebsLoss, ZeroMaskHalfFeaturesIsLn2) {
  EXPECT_NEAR(tebs_loss(BinaryMask(64, 48), constant_stack(0.5)), std::log(2.0), 1e-9);
}

TEST(TebsLoss, PerfectPredictionNearFloor) {
  const BinaryMask m = random_mask(64, 48, 3);
  FeatureStack f = constant_stack(0.0);
  for (int i = 0; i < 4; ++i) f[i] = mask_as_map(resize_mask(m, kStageW[i], kStageH[i]));
  const double loss = tebs_loss(m, f);
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, 4 * kProbabilityEpsilon * 1.01);
}

TEST(TebsLoss, MatchesBruteForce) {
  const BinaryMask m = random_mask(64, 48, 4);
  const FeatureStack f = random_stack(5, 0.0, 1.0);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += bce_reference(resize_reference(m, kStageW[i], kStageH[i]), f[i]);
  EXPECT_NEAR(tebs_loss(m, f), sum / 4.0, 1e-12);
  EXPECT_NEAR(bce(m, random_map(64, 48, 6, 0, 1)), bce_reference(m, random_map(64, 48, 6, 0, 1)), 1e-12);
}

TEST(TebsLoss, ClampsSaturatedFeatures) {
  const BinaryMask m = random_mask(8, 8, 7);
  const double worst = -std::log(kProbabilityEpsilon);
  FeatureMap wrong = mask_as_map(m);
  for (double& v : wrong.pixels()) v = 1.0 - v;
  EXPECT_NEAR(bce(m, wrong), worst, 1e-9);
}

TEST(TebsLoss, MonotoneTowardMask) {
  for (unsigned seed = 10; seed < 15; ++seed) {
    const BinaryMask m = random_mask(64, 48, seed);
    double previous = INFINITY;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      FeatureStack f = constant_stack(0.5);
      for (int i = 0; i < 4; ++i) {
        const FeatureMap target = mask_as_map(resize_mask(m, kStageW[i], kStageH[i]));
        for (std::size_t p = 0; p < f[i].size(); ++p) {
          f[i].pixels()[p] = (1 - t) * 0.5 + t * target.pixels()[p];
        }
      }
      const double loss = tebs_loss(m, f);
      EXPECT_LT(loss, previous) << "seed " << seed << " t " << t;
      previous = loss;
    }
  }
}

TEST(TebsLoss, RejectsBadInput) {
  FeatureStack f = constant_stack(0.5);
  f[2](1, 1) = NAN;
  EXPECT_THROW(tebs_loss(BinaryMask(64, 48), f), ParameterError);
  EXPECT_THROW(bce(BinaryMask(4, 4), FeatureMap(4, 5, 0.5)), ParameterError);
}

TEST(TebsLoss, MultiChannelAverages) {
  const BinaryMask m = random_mask(64, 48, 20);
  const std::vector<FeatureStack> channels = {random_stack(21, 0, 1), random_stack(25, 0, 1)};
  EXPECT_NEAR(tebs_loss(m, channels), 0.5 * (tebs_loss(m, channels[0]) + tebs_loss(m, channels[1])),
              1e-15);
}

TEST(CosSim, Examples) {
  const FeatureMap f = random_map(7, 5, 30, -1, 1);
  EXPECT_NEAR(cos_sim(f, f), 1.0, 1e-12);
  EXPECT_NEAR(cos_sim(f, negated(f)), -1.0, 1e-12);
  EXPECT_EQ(cos_sim(FeatureMap(2, 1, std::vector<double>{1, 0}), FeatureMap(2, 1, std::vector<double>{0, 1})),
            0.0);
}

TEST(CosSim, ScaleInvariance) {
  const FeatureMap a = random_map(6, 6, 31, -1, 1);
  const FeatureMap b = random_map(6, 6, 32, -1, 1);
  const double base = cos_sim(a, b);
  for (auto [alpha, beta] : {std::pair{2.0, 0.5}, std::pair{-3.0, 1.0}, std::pair{-0.1, -7.0}}) {
    FeatureMap sa = a, sb = b;
    for (double& v : sa.pixels()) v *= alpha;
    for (double& v : sb.pixels()) v *= beta;
    EXPECT_NEAR(cos_sim(sa, sb), (alpha * beta > 0 ? 1 : -1) * base, 1e-12);
  }
}

TEST(CosSim, Degenerate) {
  try {
    cos_sim(FeatureMap(3, 3, 0.0), FeatureMap(3, 3, 1.0));
    FAIL() << "expected DegenerateError";
  } catch (const DegenerateError& e) {
    EXPECT_EQ(e.kind(), DegenerateKind::kFeature);
  }
  EXPECT_THROW(cos_sim(FeatureMap(3, 3, 1.0), FeatureMap(3, 4, 1.0)), ParameterError);
}

TEST(CosSimMatrix, OrthonormalRowsGiveIdentity) {
  const FeatureMap eye(3, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_TRUE(cos_sim_matrix(eye, eye).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-15));
  const FeatureMap f = random_map(4, 6, 33, -1, 1);
  const Eigen::MatrixXd self = cos_sim_matrix(f, f);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(self(i, i), 1.0, 1e-12);
}

TEST(CosSimMatrix, MatchesTripleLoop) {
  const FeatureMap a = random_map(2, 3, 34, -1, 1);
  const FeatureMap b = random_map(2, 3, 35, -1, 1);
  const Eigen::MatrixXd s = cos_sim_matrix(a, b);
  ASSERT_EQ(s.rows(), 3);
  ASSERT_EQ(s.cols(), 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0, na = 0, nb = 0;
      for (int k = 0; k < 2; ++k) {
        dot += a(k, i) * b(k, j);
        na += a(k, i) * a(k, i);
        nb += b(k, j) * b(k, j);
      }
      EXPECT_NEAR(s(i, j), dot / std::sqrt(na * nb), 1e-12);
    }
  }
}

TEST(CosSimMatrix, ZeroRowIsDegenerate) {
  const FeatureMap a(2, 2, std::vector<double>{1, 1, 0, 0});
  EXPECT_THROW(cos_sim_matrix(a, FeatureMap(2, 2, 1.0)), DegenerateError);
}

TEST(BrLoss, Examples) {
  const FeatureStack f = random_stack(40, -1, 1);
  EXPECT_NEAR(br_loss(f, f), 0.0, 1e-12);
  FeatureStack neg = f;
  for (FeatureMap& m : neg) m = negated(m);
  EXPECT_NEAR(br_loss(f, neg), 2.0, 1e-12);

  const FeatureMap e1(2, 1, std::vector<double>{1, 0});
  const FeatureMap e2(2, 1, std::vector<double>{0, 1});
  const FeatureStack clear = {e1, e1, e1, e1};
  const FeatureStack mixed = {e1, e2, e1, e2};
  EXPECT_NEAR(br_loss(clear, mixed), 0.5, 1e-15);
}

TEST(BrLoss, ZeroOnlyForParallelStages) {
  const FeatureStack f = random_stack(41, -1, 1);
  FeatureStack scaled = f;
  for (int i = 0; i < 4; ++i) {
    for (double& v : scaled[i].pixels()) v *= 1.0 + i;
  }
  EXPECT_NEAR(br_loss(f, scaled), 0.0, 1e-12);
  FeatureStack perturbed = scaled;
  perturbed[3](0, 0) += 0.5;
  EXPECT_GT(br_loss(f, perturbed), 0.0);
}

TEST(BrLoss, ErrorsAreParameterErrors) {
  const FeatureStack f = random_stack(42, -1, 1);
  FeatureStack zero = f;
  zero[1] = FeatureMap(kStageW[1], kStageH[1], 0.0);
  EXPECT_THROW(br_loss(f, zero), ParameterError);
  FeatureStack wrong = f;
  wrong[0] = FeatureMap(3, 3, 1.0);
  EXPECT_THROW(br_loss(f, wrong), ParameterError);
}

TEST(BrLoss, MultiChannelAverages) {
  const std::vector<FeatureStack> a = {random_stack(43, -1, 1), random_stack(47, -1, 1)};
  const std::vector<FeatureStack> b = {random_stack(51, -1, 1), random_stack(55, -1, 1)};
  EXPECT_NEAR(br_loss(a, b), 0.5 * (br_loss(a[0], b[0]) + br_loss(a[1], b[1])), 1e-15);
  EXPECT_THROW(br_loss(a, std::span<const FeatureStack>(b.data(), 1)), ParameterError);
}

TEST(LambdaSchedule, Boundary) {
  EXPECT_EQ(lambda_schedule(1), 1.0);
  EXPECT_EQ(lambda_schedule(20), 1.0);
  EXPECT_EQ(lambda_schedule(21), 0.01);
  EXPECT_EQ(lambda_schedule(300), 0.01);
  EXPECT_THROW(lambda_schedule(0), ParameterError);
}

TEST(UnionLoss, Examples) {
  EXPECT_EQ(union_loss(DetectionLossTerms{}, 0.0), 0.0);
  EXPECT_NEAR(union_loss(DetectionLossTerms{1, 1, 1, 1}, 0.0), 3.0, 1e-15);
  EXPECT_NEAR(union_loss(DetectionLossTerms{1, 1, 1, 30}, 0.5), 2.51, 1e-15);
  EXPECT_THROW(union_loss(DetectionLossTerms{-1, 0, 0, 1}, 0.0), ParameterError);
  EXPECT_THROW(union_loss(DetectionLossTerms{0, 0, 0, 1}, -0.1), ParameterError);
  EXPECT_THROW(union_loss(DetectionLossTerms{0, NAN, 0, 1}, 0.0), ParameterError);
}
