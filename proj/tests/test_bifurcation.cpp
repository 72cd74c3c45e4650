#include <gtest/gtest.h>

#include <cmath>

#include "infotransfer/bifurcation.hpp"
#include "oracles.hpp"

using namespace infotransfer;

namespace {
const MixtureModel kFourDeltas = MixtureModel::deltas({-8, -4, 6, 8});
const MixtureModel kPair = MixtureModel::deltas({-1, 1});
const NoiseSchedule kSchedule = linear_schedule(1000, 1e-4, 0.02);

std::size_t stable_count(const FixedPointSearch& s) { return s.count(Stability::stable); }
}  // namespace

TEST(DriftResidual, SingleGaussianRootAtOrigin) {
  const MixtureModel gauss({1.0}, {0.0}, {1.0});
  for (double ab : {0.1, 0.9}) {
    EXPECT_EQ(drift_residual(gauss, ab, 0.0), 0.0);
    const auto fp = find_fixed_points(gauss, ab);
    ASSERT_EQ(fp.points.size(), 1u);
    EXPECT_NEAR(static_cast<double>(fp.points[0].x_star), 0.0, 1e-15);
    EXPECT_EQ(fp.points[0].stability, Stability::stable);
  }
}

TEST(DriftResidual, OddForSymmetricMixture) {
  for (double ab : {0.01, 0.3, 0.99}) {
    EXPECT_NEAR(drift_residual(kPair, ab, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(drift_residual(kPair, ab, 0.8), -drift_residual(kPair, ab, -0.8), 1e-14);
  }
}

TEST(DriftResidual, SlopeMatchesFiniteDifference) {
  const double h = 1e-5;
  for (double ab : {0.05, 0.4, 0.9}) {
    for (double x = -9; x <= 9; x += 0.6) {
      const double fd = (drift_residual(kFourDeltas, ab, x + h) - drift_residual(kFourDeltas, ab, x - h)) / (2 * h);
      EXPECT_NEAR(drift_residual_slope(kFourDeltas, ab, x), fd, 1e-6);
    }
  }
}

TEST(DriftField, LongDoubleMatchesDouble) {
  const DriftField g(kFourDeltas, 0.3);
  for (double x : {-5.0, -0.2, 4.4}) {
    EXPECT_NEAR(static_cast<double>(g(x)), drift_residual(kFourDeltas, 0.3, x), 1e-12);
    EXPECT_NEAR(static_cast<double>(g.slope(x)), drift_residual_slope(kFourDeltas, 0.3, x), 1e-12);
  }
}

TEST(FixedPoints, SymmetricPairAtHighNoiseIsUnimodal) {
  const auto fp = find_fixed_points(kPair, kSchedule.alpha_bar(1000));
  ASSERT_EQ(fp.points.size(), 1u);
  EXPECT_NEAR(static_cast<double>(fp.points[0].x_star), 0.0, 1e-12);
  EXPECT_EQ(fp.points[0].stability, Stability::stable);
}

TEST(FixedPoints, SymmetricPairAtLowNoisePitchfork) {
  const double ab = 0.999;
  const auto fp = find_fixed_points(kPair, ab);
  ASSERT_EQ(fp.points.size(), 3u);
  EXPECT_EQ(fp.points[1].stability, Stability::unstable);
  EXPECT_NEAR(static_cast<double>(fp.points[1].x_star), 0.0, 1e-12);
  EXPECT_EQ(fp.points[0].stability, Stability::stable);
  EXPECT_EQ(fp.points[2].stability, Stability::stable);
  EXPECT_NEAR(static_cast<double>(fp.points[2].x_star), std::sqrt(ab), 0.01);
  EXPECT_NEAR(static_cast<double>(fp.points[0].x_star + fp.points[2].x_star), 0.0, 1e-9);
  EXPECT_EQ(oracle::sign_change_count(kPair, ab, default_search_box(kPair, ab), 100000), 3u);
}

TEST(FixedPoints, ResidualsAndOracleCountsOnFourDeltas) {
  for (std::size_t t = 10; t <= 1000; t += 30) {
    const double ab = kSchedule.alpha_bar(t);
    const auto fp = find_fixed_points(kFourDeltas, ab);
    for (const auto& p : fp.points) {
      EXPECT_LT(p.residual, 1e-10L) << "t=" << t;
      EXPECT_DOUBLE_EQ(p.alpha_bar, ab);
    }
    EXPECT_EQ(fp.points.size(), oracle::sign_change_count(kFourDeltas, ab, default_search_box(kFourDeltas, ab), 100000))
        << "t=" << t;
  }
}

TEST(FixedPoints, StableAndUnstableAlternate) {
  for (std::size_t t = 5; t <= 1000; t += 55) {
    const auto fp = find_fixed_points(kFourDeltas, kSchedule.alpha_bar(t));
    ASSERT_FALSE(fp.points.empty());
    EXPECT_EQ(fp.points.front().stability, Stability::stable);
    EXPECT_EQ(fp.points.back().stability, Stability::stable);
    for (std::size_t i = 1; i < fp.points.size(); ++i) {
      EXPECT_NE(fp.points[i].stability, fp.points[i - 1].stability);
      EXPECT_GT(fp.points[i].x_star, fp.points[i - 1].x_star);
    }
  }
}

TEST(FixedPoints, StableBranchesGrowOneToFour) {
  std::size_t previous = 4;
  for (std::size_t t = 1; t <= 1000; t += 3) {
    const std::size_t n = stable_count(find_fixed_points(kFourDeltas, kSchedule.alpha_bar(t)));
    EXPECT_LE(n, previous);
    previous = n;
  }
  EXPECT_EQ(stable_count(find_fixed_points(kFourDeltas, kSchedule.alpha_bar(1))), 4u);
  EXPECT_EQ(stable_count(find_fixed_points(kFourDeltas, kSchedule.alpha_bar(1000))), 1u);
}

TEST(FixedPoints, DiagnosticsWhenNothingConverges) {
  const FixedPointOptions opts{.n_starts = 4, .max_iterations = 0};
  const auto fp = find_fixed_points(kFourDeltas, 0.5, SearchBox{20, 30}, opts);
  EXPECT_TRUE(fp.points.empty());
  EXPECT_FALSE(fp.diagnostics.empty());
}

TEST(TraceBifurcations, SingleComponentHasNoCriticalLevels) {
  const MixtureModel gauss({1.0}, {3.0}, {0.5});
  const auto d = trace_bifurcations(gauss, kSchedule, 50);
  EXPECT_TRUE(d.critical.empty());
  for (const auto& level : d.levels) {
    ASSERT_EQ(level.points.size(), 1u);
    // stationary point of the diffused Gaussian under the 0.5 x drift
    const double m = std::sqrt(level.alpha_bar) * 3.0;
    const double v = level.alpha_bar * 0.5 + 1 - level.alpha_bar;
    EXPECT_NEAR(static_cast<double>(level.points[0].x_star), m / (1 + 0.5 * v), 1e-12);
  }
}

TEST(TraceBifurcations, CriticalLevelsAreAdjacentSteps) {
  const auto d = trace_bifurcations(kFourDeltas, kSchedule, 10);
  ASSERT_EQ(d.critical.size(), 3u);
  for (const auto& c : d.critical) {
    EXPECT_EQ(c.t_high_noise, c.t_low_noise + 1);
    EXPECT_GT(c.count_low_noise, c.count_high_noise);
    EXPECT_EQ(find_fixed_points(kFourDeltas, kSchedule.alpha_bar(c.t_low_noise)).points.size(), c.count_low_noise);
    EXPECT_EQ(find_fixed_points(kFourDeltas, kSchedule.alpha_bar(c.t_high_noise)).points.size(), c.count_high_noise);
  }
  EXPECT_EQ(d.critical.front().count_low_noise, 7u);
  EXPECT_EQ(d.critical.back().count_high_noise, 1u);
}

TEST(TraceBifurcations, HeavierClassPersistsLonger) {
  // weights (1/3, 2/3): the surviving high-noise branch sits on the heavy side
  const MixtureModel m({1.0 / 3, 2.0 / 3}, {-1, 1}, {0, 0});
  const auto d = trace_bifurcations(m, kSchedule, 10);
  ASSERT_FALSE(d.critical.empty());
  const auto& before = d.levels.front().points;
  ASSERT_EQ(before.size(), 3u);
  const auto& last = d.levels.back().points;
  ASSERT_EQ(last.size(), 1u);
  EXPECT_GT(last[0].x_star, 0);
  for (const auto& level : d.levels) {
    if (level.points.size() == 1) EXPECT_GT(level.points[0].x_star, 0) << "t=" << level.t;
  }
}

TEST(TraceBifurcations, CoarseSplitPrecedesFineSplits) {
  const MixtureModel m = MixtureModel::deltas({-8, -4, 4, 8});
  const auto d = trace_bifurcations(m, kSchedule, 10);
  ASSERT_EQ(d.critical.size(), 2u);
  // in forward time the fine splits vanish first (7 -> 3), then the coarse one (3 -> 1)
  EXPECT_EQ(d.critical[0].count_low_noise, 7u);
  EXPECT_EQ(d.critical[0].count_high_noise, 3u);
  EXPECT_EQ(d.critical[1].count_high_noise, 1u);
  EXPECT_LT(d.critical[0].s, d.critical[1].s);
  for (const auto& level : d.levels) {
    const auto& pts = level.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_NEAR(static_cast<double>(pts[i].x_star + pts[pts.size() - 1 - i].x_star), 0.0, 1e-9);
    }
  }
}

TEST(LocateSplit, OrderedAsTheBranchesSeparate) {
  const auto upper = locate_split(kFourDeltas, kSchedule, 2, 3);
  const auto lower = locate_split(kFourDeltas, kSchedule, 0, 1);
  const auto middle = locate_split(kFourDeltas, kSchedule, 1, 2);
  ASSERT_TRUE(upper && lower && middle);
  EXPECT_LT(upper->s, lower->s);
  EXPECT_LT(lower->s, middle->s);
  EXPECT_TRUE(branches_separated(kFourDeltas, kSchedule.alpha_bar(upper->t_low_noise), 2, 3));
  EXPECT_FALSE(branches_separated(kFourDeltas, kSchedule.alpha_bar(upper->t_high_noise), 2, 3));
  EXPECT_THROW(locate_split(kFourDeltas, kSchedule, 1, 1), ParameterError);
}

TEST(LocateSplit, NeverSeparatingComponents) {
  const MixtureModel close({0.5, 0.5}, {-0.2, 0.2}, {1.0, 1.0});
  EXPECT_FALSE(locate_split(close, kSchedule, 0, 1).has_value());
}
