#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "infotransfer/entropy.hpp"
#include "infotransfer/tracker.hpp"

using namespace infotransfer;

namespace {
const MixtureModel kFourDeltas = MixtureModel::deltas({-8, -4, 6, 8});
const MixtureModel kPair = MixtureModel::deltas({-1, 1});
const NoiseSchedule kSchedule = linear_schedule(1000, 1e-4, 0.02);

struct ZeroModel final : ScoreModel {
  double epsilon(double, std::size_t, Branch) const override { return 0.0; }
};

struct BrokenModel final : ScoreModel {
  double epsilon(double, std::size_t t, Branch) const override {
    return t == 500 ? std::nan("") : 0.0;
  }
};
}  // namespace

TEST(GmmScoreModel, EpsilonIsScaledScore) {
  const auto part = make_partition(kFourDeltas, {3}, {2});
  const GmmScoreModel model(kFourDeltas, part, kSchedule);
  const std::size_t t = 400;
  const double ab = kSchedule.alpha_bar(t);
  const double x = 1.7;
  const IndexSet z0{3}, z1{2};
  EXPECT_NEAR(model.epsilon(x, t, Branch::z0), -std::sqrt(1 - ab) * score(kFourDeltas, ab, x, z0), 1e-14);
  EXPECT_NEAR(model.epsilon(x, t, Branch::z1), -std::sqrt(1 - ab) * score(kFourDeltas, ab, x, z1), 1e-14);
  EXPECT_NEAR(model.epsilon(x, t, Branch::null), -std::sqrt(1 - ab) * score(kFourDeltas, ab, x), 1e-14);
  EXPECT_THROW(model.epsilon(x, 0, Branch::z0), ModelEvaluationError);
  EXPECT_THROW(model.epsilon(x, 1001, Branch::z0), ModelEvaluationError);
}

TEST(GmmScoreModel, NullComplementUsesFullMixture) {
  const auto part = one_vs_rest(kFourDeltas, 0);
  const GmmScoreModel null_model(kFourDeltas, part, kSchedule, Complement::null);
  EXPECT_DOUBLE_EQ(null_model.epsilon(0.3, 200, Branch::z1), null_model.epsilon(0.3, 200, Branch::null));
  const GmmScoreModel exact(kFourDeltas, part, kSchedule, Complement::exact);
  // near component 0 the complement and the full mixture disagree
  EXPECT_GT(std::abs(exact.epsilon(-7.0, 200, Branch::z1) - exact.epsilon(-7.0, 200, Branch::null)), 1.0);
}

TEST(PosteriorMean, ZeroNoisePrediction) {
  const ZeroModel zero;
  for (std::size_t t : {1u, 500u, 1000u}) {
    EXPECT_DOUBLE_EQ(posterior_mean(zero, 2.0, t, Branch::z0, kSchedule),
                     2.0 / std::sqrt(1 - kSchedule.beta(t)));
  }
}

TEST(PosteriorMean, ScoreFormMatchesEpsilonForm) {
  const MixtureModel gauss({0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0});
  const auto part = one_vs_one(gauss, 0, 1);
  const GmmScoreModel model(gauss, part, kSchedule);
  for (std::size_t t : {1u, 250u, 999u}) {
    const double beta = kSchedule.beta(t);
    for (double x : {-2.0, 0.5, 3.0}) {
      // standard normal score is -x at every noise level
      const double expected = (x + beta * (-x)) / std::sqrt(1 - beta);
      EXPECT_NEAR(posterior_mean(model, x, t, Branch::z0, kSchedule), expected, 1e-14);
    }
  }
}

TEST(PosteriorMean, SmallBetaIsNearIdentity) {
  // bounded score needs non-degenerate components
  const MixtureModel smooth({0.5, 0.5}, {-1, 1}, {0.5, 0.5});
  const auto part = one_vs_one(smooth, 0, 1);
  const NoiseSchedule tiny = linear_schedule(10, 1e-12, 1e-12);
  const GmmScoreModel model(smooth, part, tiny);
  EXPECT_NEAR(posterior_mean(model, 0.7, 5, Branch::z0, tiny), 0.7, 1e-9);
}

TEST(PosteriorMean, NonFiniteModelOutputReported) {
  const BrokenModel broken;
  try {
    posterior_mean(broken, 0.1, 500, Branch::z1, kSchedule);
    FAIL();
  } catch (const ModelEvaluationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("t=500"), std::string::npos) << msg;
    EXPECT_NE(msg.find("z1"), std::string::npos) << msg;
  }
  EXPECT_THROW(posterior_mean(broken, 0.1, 0, Branch::z1, kSchedule), ParameterError);
}

TEST(AncestralStep, LastStepIsDeterministic) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule);
  const TrajectoryState s{0.4, std::log(0.5), 1, Branch::z0};
  const auto a = ancestral_step(s, 3.0, model, kSchedule);
  EXPECT_EQ(a.t, 0u);
  EXPECT_DOUBLE_EQ(a.x, posterior_mean(model, 0.4, 1, Branch::z0, kSchedule));
}

TEST(AncestralStep, ZeroDrawFollowsBranchMean) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule);
  const TrajectoryState s{0.4, std::log(0.5), 300, Branch::z1};
  EXPECT_DOUBLE_EQ(ancestral_step(s, 0.0, model, kSchedule).x,
                   posterior_mean(model, 0.4, 300, Branch::z1, kSchedule));
  const TrackerOptions literal_drift{.drift = BranchDrift::z0_only};
  EXPECT_DOUBLE_EQ(ancestral_step(s, 0.0, model, kSchedule, literal_drift).x,
                   posterior_mean(model, 0.4, 300, Branch::z0, kSchedule));
  const TrajectoryState done{0.4, std::log(0.5), 0, Branch::z0};
  EXPECT_THROW(ancestral_step(done, 0.0, model, kSchedule), ParameterError);
}

TEST(AncestralStep, TerminalSamplesSplitEvenly) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule, Complement::exact);
  // unconditional sampling: drive every trajectory with the null model
  struct NullDriven final : ScoreModel {
    const GmmScoreModel& inner;
    explicit NullDriven(const GmmScoreModel& m) : inner(m) {}
    double epsilon(double x, std::size_t t, Branch) const override {
      return inner.epsilon(x, t, Branch::null);
    }
  } null_driven(model);
  std::mt19937_64 rng(123);
  std::normal_distribution<double> normal;
  const int n = 1000;
  int upper = 0;
  for (int i = 0; i < n; ++i) {
    TrajectoryState s{normal(rng), std::log(0.5), 1000, Branch::z0};
    while (s.t > 0) s = ancestral_step(rng, s, null_driven, kSchedule);
    EXPECT_LT(std::min(std::abs(s.x - 1), std::abs(s.x + 1)), 0.1);
    upper += s.x > 0;
  }
  const double sigma = std::sqrt(n * 0.25);
  EXPECT_LT(std::abs(upper - n / 2.0), 3 * sigma);
}

TEST(PosteriorUpdate, EqualMeansLeavePosteriorUnchanged) {
  const double lp = std::log(0.3);
  EXPECT_NEAR(posterior_update(lp, 1.0, 0.5, 0.5, 0.01), lp, 1e-15);
  EXPECT_NEAR(posterior_update(lp, 1.0, 0.5, 0.5, 0.01, ExponentScale::literal), lp, 1e-15);
}

TEST(PosteriorUpdate, MovesTowardNearerMean) {
  const double lp = std::log(0.5);
  EXPECT_GT(posterior_update(lp, 0.9, 1.0, -1.0, 0.01), lp);
  EXPECT_LT(posterior_update(lp, -0.9, 1.0, -1.0, 0.01), lp);
  EXPECT_GT(posterior_update(lp, 0.9, 1.0, -1.0, 0.01, ExponentScale::literal), lp);
}

TEST(PosteriorUpdate, ClampedAwayFromZeroAndOne) {
  const double lp = posterior_update(std::log(0.5), 50.0, 50.0, -50.0, 1e-4);
  EXPECT_LE(std::exp(lp), 1 - kPosteriorFloor + 1e-16);
  const double lo = posterior_update(std::log(0.5), -50.0, 50.0, -50.0, 1e-4);
  EXPECT_GE(std::exp(lo), kPosteriorFloor * (1 - 1e-12));
}

TEST(Tracker, TrackedPosteriorFollowsClosedForm) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule);
  std::size_t agree = 0, total = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    std::vector<double> path;
    const auto posts = track_trajectory(model, kSchedule, 0.5, i % 2 ? Branch::z1 : Branch::z0, 9, i,
                                        {}, &path);
    for (std::size_t t = 1; t < 1000; ++t) {
      const auto exact = class_posteriors(kPair, kSchedule.alpha_bar(t), path[t]);
      agree += std::abs(posts[t] - exact[0]) < 0.05;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(total), 0.95);
}

TEST(Tracker, StreamingEqualsReplay) {
  const auto part = make_partition(kFourDeltas, {3}, {2});
  const GmmScoreModel model(kFourDeltas, part, kSchedule);
  for (std::uint64_t i = 0; i < 5; ++i) {
    std::vector<double> path;
    const auto streamed = track_trajectory(model, kSchedule, 0.5, Branch::z1, 4, i, {}, &path);
    const auto replayed = replay_posterior(model, kSchedule, 0.5, path);
    for (std::size_t t = 0; t <= 1000; ++t) EXPECT_NEAR(streamed[t], replayed[t], 1e-15);
    // later states never change earlier posteriors
    auto altered = path;
    for (std::size_t t = 0; t < 400; ++t) altered[t] += 5.0;
    const auto partial = replay_posterior(model, kSchedule, 0.5, altered);
    for (std::size_t t = 400; t <= 1000; ++t) EXPECT_EQ(partial[t], replayed[t]);
  }
}

TEST(Tracker, PosteriorsStayInsideUnitInterval) {
  const auto part = make_partition(kFourDeltas, {3}, {2});
  const GmmScoreModel model(kFourDeltas, part, kSchedule);
  const auto posts = track_trajectory(model, kSchedule, 0.5, Branch::z0, 1, 0);
  for (double p : posts) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Estimate, BoundaryEntropies) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule);
  const auto est = estimate_conditional_entropy(model, kSchedule, 0.5, 8, 8, 3);
  EXPECT_DOUBLE_EQ(est.H_bits[1000], 1.0);
  const MixtureModel weighted({0.1, 0.9}, {-1, 1}, {0, 0});
  const GmmScoreModel wmodel(weighted, one_vs_one(weighted, 0, 1), kSchedule);
  const auto west = estimate_conditional_entropy(wmodel, kSchedule, 0.1, 8, 8, 3);
  EXPECT_NEAR(west.H_bits[1000], 0.469, 1e-3);
}

TEST(Estimate, SeedDeterminismAndThreadIndependence) {
  const auto part = make_partition(kFourDeltas, {3}, {2});
  const GmmScoreModel model(kFourDeltas, part, kSchedule);
  const auto a = estimate_conditional_entropy(model, kSchedule, 0.5, 150, 150, 77);
  const auto b = estimate_conditional_entropy(model, kSchedule, 0.5, 150, 150, 77);
  EXPECT_TRUE(a == b);
  const auto c = estimate_conditional_entropy(model, kSchedule, 0.5, 150, 150, 77, {.threads = 4});
  for (std::size_t t = 0; t <= 1000; ++t) EXPECT_NEAR(a.H_bits[t], c.H_bits[t], 1e-9);
  const auto d = estimate_conditional_entropy(model, kSchedule, 0.5, 150, 150, 78);
  EXPECT_FALSE(a == d);
}

TEST(Estimate, TracksQuadratureOnFourDeltasMixture) {
  const auto part = make_partition(kFourDeltas, {3}, {2});
  const GmmScoreModel model(kFourDeltas, part, kSchedule);
  const auto est = estimate_conditional_entropy(model, kSchedule, 0.5, 1000, 1000, 42);
  double worst = 0;
  for (std::size_t t = 1; t <= 1000; t += 9) {
    const double quad = conditional_entropy_at(kFourDeltas, part, kSchedule.alpha_bar(t));
    worst = std::max(worst, std::abs(est.H_bits[t] - quad));
  }
  EXPECT_LT(worst, 0.05);
}

TEST(Estimate, SingleSampleIsValid) {
  const auto part = one_vs_one(kPair, 0, 1);
  const GmmScoreModel model(kPair, part, kSchedule);
  const auto est = estimate_conditional_entropy(model, kSchedule, 0.5, 1, 1, 0);
  for (double h : est.H_bits) {
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
  }
  EXPECT_THROW(estimate_conditional_entropy(model, kSchedule, 0.5, 0, 1, 0), ParameterError);
  EXPECT_THROW(estimate_conditional_entropy(model, kSchedule, 1.0, 1, 1, 0), ParameterError);
}

TEST(Estimate, ModelErrorsNameTrajectory) {
  const BrokenModel broken;
  try {
    estimate_conditional_entropy(broken, kSchedule, 0.5, 2, 2, 0);
    FAIL();
  } catch (const ModelEvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("trajectory 0"), std::string::npos) << e.what();
  }
}

TEST(ReplayScoreModel, RoundTripInterpolates) {
  const auto part = one_vs_one(kPair, 0, 1);
  const NoiseSchedule sched = linear_schedule(20, 1e-3, 0.2);
  const GmmScoreModel model(kPair, part, sched);
  std::vector<double> xs;
  for (double x = -4; x <= 4.0001; x += 0.01) xs.push_back(x);
  std::stringstream buffer;
  const std::vector<Branch> labels{Branch::z0, Branch::z1};
  write_replay_csv(buffer, model, sched.steps(), xs, labels);
  const auto replay = ReplayScoreModel::load(buffer);
  EXPECT_TRUE(replay.has(7, Branch::z1));
  EXPECT_FALSE(replay.has(7, Branch::null));
  for (double x : {-3.333, 0.0051, 2.71}) {
    EXPECT_NEAR(replay.epsilon(x, 7, Branch::z0), model.epsilon(x, 7, Branch::z0), 1e-3);
  }
  EXPECT_THROW(replay.epsilon(0.0, 7, Branch::null), ModelEvaluationError);
}

TEST(ReplayScoreModel, RejectsBadHeader) {
  std::stringstream bad("x,y\n1,2\n");
  EXPECT_THROW(ReplayScoreModel::load(bad), ConfigError);
  EXPECT_THROW(ReplayScoreModel::load_file("/nonexistent/replay.csv"), ConfigError);
}
