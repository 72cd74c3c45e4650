// Monte-Carlo estimate of H(z | x_t) for score models without closed-form
// densities: ancestral sampling of both branch populations plus online
// Bayesian tracking of P(z0 | x_t) along each trajectory.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "infotransfer/core.hpp"
#include "infotransfer/error.hpp"
#include "infotransfer/mixture.hpp"

namespace infotransfer {

/// Labels a trained denoiser can be conditioned on.
enum class Branch { z0, z1, null };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::z0: return "z0";
    case Branch::z1: return "z1";
    case Branch::null: return "null";
  }
  return "?";
}

/// Noise-prediction model eps(x, t; label) = -sqrt(1 - alpha_bar_t) d/dx log p(x_t | label).
///
/// Implementations must be deterministic and safe to call concurrently.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual double epsilon(double x, std::size_t t, Branch label) const = 0;
};

/// How the z1 side is represented in a one-vs-rest decision.
enum class Complement {
  exact,  ///< score of the z1 sub-mixture
  null,   ///< unconditional (full-mixture) score stands in for z1
};

/// Exact noise predictions of a diffused Gaussian mixture.
class GmmScoreModel final : public ScoreModel {
 public:
  GmmScoreModel(MixtureModel mixture, Partition partition, NoiseSchedule schedule,
                Complement complement = Complement::exact)
      : mixture_(std::move(mixture)),
        partition_(std::move(partition)),
        schedule_(std::move(schedule)),
        complement_(complement),
        z0_(partition_.z0().begin(), partition_.z0().end()),
        z1_(complement_ == Complement::exact
                ? IndexSet(partition_.z1().begin(), partition_.z1().end())
                : label_components(Label::null(), mixture_.size())),
        all_(label_components(Label::null(), mixture_.size())) {
    if (partition_.mixture_size() != mixture_.size()) {
      throw PartitionError("partition was built for a different mixture");
    }
    diffused_.reserve(schedule_.steps() + 1);
    for (std::size_t t = 0; t <= schedule_.steps(); ++t) {
      const double ab = schedule_.alpha_bar(t);
      diffused_.push_back(ab < 1.0 || !mixture_.has_delta()
                              ? diffuse<double>(mixture_, ab)
                              : std::vector<DiffusedComponent<double>>{});
    }
  }

  double epsilon(double x, std::size_t t, Branch label) const override {
    if (t == 0 || t > schedule_.steps()) {
      throw ModelEvaluationError("GMM score model queried at step " + std::to_string(t));
    }
    thread_local std::vector<double> scratch;
    const IndexSet& subset = label == Branch::z0 ? z0_ : label == Branch::z1 ? z1_ : all_;
    const double ab = schedule_.alpha_bar(t);
    return -std::sqrt(1.0 - ab) * detail::subset_score<double>(diffused_[t], subset, x, scratch);
  }

  const MixtureModel& mixture() const noexcept { return mixture_; }
  const Partition& partition() const noexcept { return partition_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }

 private:
  MixtureModel mixture_;
  Partition partition_;
  NoiseSchedule schedule_;
  Complement complement_;
  IndexSet z0_;
  IndexSet z1_;
  IndexSet all_;
  std::vector<std::vector<DiffusedComponent<double>>> diffused_;
};

/// Precomputed eps values on per-(t, label) x grids, linearly interpolated.
///
/// CSV layout: header `t,label,x,eps`, label in {z0, z1, null}, one row per
/// grid node. Outside a grid the end segments are extended linearly.
class ReplayScoreModel final : public ScoreModel {
 public:
  static ReplayScoreModel load(std::istream& in) {
    ReplayScoreModel model;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      if (!header_seen) {
        if (line != "t,label,x,eps") {
          throw ConfigError("replay file: expected header 't,label,x,eps', got '" + line + "'");
        }
        header_seen = true;
        continue;
      }
      std::istringstream row(line);
      std::string t_s, label_s, x_s, eps_s;
      if (!std::getline(row, t_s, ',') || !std::getline(row, label_s, ',') ||
          !std::getline(row, x_s, ',') || !std::getline(row, eps_s)) {
        throw ConfigError("replay file line " + std::to_string(line_no) + ": expected 4 fields");
      }
      Branch label;
      if (label_s == "z0") label = Branch::z0;
      else if (label_s == "z1") label = Branch::z1;
      else if (label_s == "null") label = Branch::null;
      else throw ConfigError("replay file line " + std::to_string(line_no) + ": unknown label '" + label_s + "'");
      try {
        const std::size_t t = std::stoul(t_s);
        auto& table = model.tables_[{t, label}];
        table.x.push_back(std::stod(x_s));
        table.eps.push_back(std::stod(eps_s));
      } catch (const std::logic_error&) {
        throw ConfigError("replay file line " + std::to_string(line_no) + ": malformed number");
      }
    }
    if (!header_seen) throw ConfigError("replay file is empty");
    for (auto& [key, table] : model.tables_) {
      if (table.x.size() < 2) {
        throw ConfigError("replay grid for t=" + std::to_string(key.first) + " label=" +
                          to_string(key.second) + " needs at least 2 nodes");
      }
      for (std::size_t i = 1; i < table.x.size(); ++i) {
        if (!(table.x[i] > table.x[i - 1])) {
          throw ConfigError("replay grid for t=" + std::to_string(key.first) +
                            " is not strictly increasing in x");
        }
      }
    }
    return model;
  }

  static ReplayScoreModel load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open replay file '" + path + "'");
    return load(in);
  }

  double epsilon(double x, std::size_t t, Branch label) const override {
    const auto it = tables_.find({t, label});
    if (it == tables_.end()) {
      throw ModelEvaluationError("replay model has no grid for t=" + std::to_string(t) +
                                 " label=" + to_string(label));
    }
    const auto& xs = it->second.x;
    const auto& ys = it->second.eps;
    auto upper = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t hi = static_cast<std::size_t>(upper - xs.begin());
    hi = std::clamp<std::size_t>(hi, 1, xs.size() - 1);
    const std::size_t lo = hi - 1;
    const double f = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + f * (ys[hi] - ys[lo]);
  }

  bool has(std::size_t t, Branch label) const { return tables_.contains({t, label}); }

 private:
  struct Table {
    std::vector<double> x;
    std::vector<double> eps;
  };
  std::map<std::pair<std::size_t, Branch>, Table> tables_;
};

/// Tabulates `model` on `xs` for t = 1..T and the given labels in replay CSV layout.
inline void write_replay_csv(std::ostream& out, const ScoreModel& model, std::size_t steps,
                             std::span<const double> xs,
                             std::span<const Branch> labels = std::span<const Branch>()) {
  static constexpr Branch kAll[] = {Branch::z0, Branch::z1, Branch::null};
  if (labels.empty()) labels = kAll;
  out << "t,label,x,eps\n";
  char buf[64];
  for (std::size_t t = 1; t <= steps; ++t) {
    for (Branch label : labels) {
      for (double x : xs) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", x, model.epsilon(x, t, label));
        out << t << ',' << to_string(label) << ',' << buf << '\n';
      }
    }
  }
}

/// Conditional mean of the reverse step,
/// mu(x_t; label) = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps(x_t; label)) / sqrt(1 - beta_t).
inline double posterior_mean(const ScoreModel& model, double x, std::size_t t, Branch label,
                             const NoiseSchedule& schedule) {
  if (t == 0 || t > schedule.steps()) {
    throw ParameterError("posterior_mean: step " + std::to_string(t) + " outside 1.." +
                         std::to_string(schedule.steps()));
  }
  const double eps = model.epsilon(x, t, label);
  if (!std::isfinite(eps)) {
    throw ModelEvaluationError("non-finite noise prediction at x=" + std::to_string(x) +
                               " t=" + std::to_string(t) + " label=" + to_string(label));
  }
  const double beta = schedule.beta(t);
  const double ab = schedule.alpha_bar(t);
  return (x - beta / std::sqrt(1.0 - ab) * eps) / std::sqrt(1.0 - beta);
}

/// Scale applied to the squared-distance difference in the posterior update.
enum class ExponentScale {
  transition_variance,  ///< 1 / (2 beta_t): Gaussian reverse kernel with variance beta_t
  literal,              ///< 1 / (1 - beta_t)
};

/// Mean that drives a branch's own trajectory.
enum class BranchDrift {
  own_label,  ///< each population follows its own conditional model
  z0_only,    ///< every population follows mu(x; z0)
};

struct TrajectoryState {
  double x = 0.0;
  /// log P(z0 | x_t); P(z1 | x_t) is 1 - exp(log_post_z0).
  double log_post_z0 = std::log(0.5);
  std::size_t t = 0;
  Branch branch = Branch::z0;

  double post_z0() const { return std::exp(log_post_z0); }
};

inline constexpr double kPosteriorFloor = 1e-12;

/// log P(z0 | x_{t-1}) from log P(z0 | x_t) after observing x_next.
inline double posterior_update(double log_post_z0, double x_next, double mu_z0, double mu_z1,
                               double beta_t,
                               ExponentScale scale = ExponentScale::transition_variance) {
  const double c = scale == ExponentScale::transition_variance ? 1.0 / (2.0 * beta_t)
                                                               : 1.0 / (1.0 - beta_t);
  const double d0 = x_next - mu_z0;
  const double d1 = x_next - mu_z1;
  const double p0 = std::clamp(std::exp(log_post_z0), kPosteriorFloor, 1.0 - kPosteriorFloor);
  const double a0 = std::log(p0) - c * d0 * d0;
  const double a1 = std::log1p(-p0) - c * d1 * d1;
  const double top = std::max(a0, a1);
  const double norm = top + std::log(std::exp(a0 - top) + std::exp(a1 - top));
  const double next = std::clamp(std::exp(a0 - norm), kPosteriorFloor, 1.0 - kPosteriorFloor);
  return std::log(next);
}

struct TrackerOptions {
  ExponentScale exponent = ExponentScale::transition_variance;
  BranchDrift drift = BranchDrift::own_label;
  /// 0 = hardware concurrency. Results do not depend on this value.
  std::size_t threads = 1;
};

/// One reverse step t -> t-1 with an explicit standard-normal draw.
/// The draw is ignored at t = 1.
inline TrajectoryState ancestral_step(const TrajectoryState& state, double standard_normal,
                                      const ScoreModel& model, const NoiseSchedule& schedule,
                                      const TrackerOptions& options = {}) {
  if (state.t == 0) throw ParameterError("ancestral_step: trajectory already at t = 0");
  const std::size_t t = state.t;
  const double mu0 = posterior_mean(model, state.x, t, Branch::z0, schedule);
  const double mu1 = posterior_mean(model, state.x, t, Branch::z1, schedule);
  const double beta = schedule.beta(t);
  const double noise = t > 1 ? std::sqrt(beta) * standard_normal : 0.0;
  const double drive =
      (options.drift == BranchDrift::z0_only || state.branch == Branch::z0) ? mu0 : mu1;
  TrajectoryState next = state;
  next.x = drive + noise;
  next.t = t - 1;
  next.log_post_z0 = posterior_update(state.log_post_z0, next.x, mu0, mu1, beta, options.exponent);
  return next;
}

/// Draws its noise from `rng`.
template <class Rng>
TrajectoryState ancestral_step(Rng& rng, const TrajectoryState& state, const ScoreModel& model,
                               const NoiseSchedule& schedule, const TrackerOptions& options = {}) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = state.t > 1 ? normal(rng) : 0.0;
  return ancestral_step(state, z, model, schedule, options);
}

/// Seed of the RNG stream owned by trajectory `index` of `branch`.
inline std::uint64_t trajectory_seed(std::uint64_t seed, Branch branch, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(branch)) ^ index);
}

/// Runs one trajectory from x_T ~ N(0, 1) to x_0 and returns the tracked
/// P(z0 | x_t) for t = T..0 (index t).
inline std::vector<double> track_trajectory(const ScoreModel& model, const NoiseSchedule& schedule,
                                            double prior_z0, Branch branch, std::uint64_t seed,
                                            std::uint64_t index,
                                            const TrackerOptions& options = {},
                                            std::vector<double>* path = nullptr) {
  const std::size_t steps = schedule.steps();
  std::mt19937_64 rng(trajectory_seed(seed, branch, index));
  std::normal_distribution<double> normal(0.0, 1.0);
  TrajectoryState state{normal(rng), std::log(prior_z0), steps, branch};
  std::vector<double> posts(steps + 1);
  posts[steps] = prior_z0;
  if (path) {
    path->assign(steps + 1, 0.0);
    (*path)[steps] = state.x;
  }
  while (state.t > 0) {
    state = ancestral_step(rng, state, model, schedule, options);
    posts[state.t] = state.post_z0();
    if (path) (*path)[state.t] = state.x;
  }
  return posts;
}

/// Recomputes the tracked posterior from a recorded path x_T..x_0 (index t).
/// Entry t uses only x_T..x_t.
inline std::vector<double> replay_posterior(const ScoreModel& model,
                                            const NoiseSchedule& schedule, double prior_z0,
                                            std::span<const double> path,
                                            ExponentScale exponent = ExponentScale::transition_variance) {
  const std::size_t steps = schedule.steps();
  if (path.size() != steps + 1) throw ParameterError("path length must be T + 1");
  std::vector<double> posts(steps + 1);
  posts[steps] = prior_z0;
  double log_post = std::log(prior_z0);
  for (std::size_t t = steps; t >= 1; --t) {
    const double mu0 = posterior_mean(model, path[t], t, Branch::z0, schedule);
    const double mu1 = posterior_mean(model, path[t], t, Branch::z1, schedule);
    log_post = posterior_update(log_post, path[t - 1], mu0, mu1, schedule.beta(t), exponent);
    posts[t - 1] = std::exp(log_post);
  }
  return posts;
}

/// Monte-Carlo conditional entropy series, index t = 0..T.
struct McEntropyEstimate {
  std::vector<double> H_bits;
  /// Per-branch means of P log2 P + (1 - P) log2 (1 - P); non-positive.
  std::vector<double> H_z0_mean;
  std::vector<double> H_z1_mean;
  std::size_t N_z0 = 0;
  std::size_t N_z1 = 0;
  double prior_z0 = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const McEntropyEstimate&, const McEntropyEstimate&) = default;
};

namespace detail {

inline constexpr std::size_t kTrajectoryChunk = 64;

// Sum over trajectories of p log2 p + (1-p) log2 (1-p), per step.
inline std::vector<double> branch_sums(const ScoreModel& model, const NoiseSchedule& schedule,
                                       double prior_z0, Branch branch, std::size_t count,
                                       std::uint64_t seed, const TrackerOptions& options) {
  const std::size_t steps = schedule.steps();
  const std::size_t chunks = (count + kTrajectoryChunk - 1) / kTrajectoryChunk;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(steps + 1, 0.0));
  auto run_chunk = [&](std::size_t c) {
    auto& acc = partial[c];
    const std::size_t end = std::min(count, (c + 1) * kTrajectoryChunk);
    for (std::size_t i = c * kTrajectoryChunk; i < end; ++i) {
      std::vector<double> posts;
      try {
        posts = track_trajectory(model, schedule, prior_z0, branch, seed, i, options);
      } catch (const Error& e) {
        throw ModelEvaluationError(std::string("branch ") + to_string(branch) + " trajectory " +
                                   std::to_string(i) + ": " + e.what());
      }
      for (std::size_t t = 0; t <= steps; ++t) acc[t] -= binary_entropy_bits(posts[t]);
    }
  };

  std::size_t threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += threads) run_chunk(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> total(steps + 1, 0.0);
  for (const auto& acc : partial) {
    for (std::size_t t = 0; t <= steps; ++t) total[t] += acc[t];
  }
  return total;
}

}  // namespace detail

/// Estimates H(z | x_t) for t = T..0 by tracking N_z0 trajectories driven by
/// the z0 model and N_z1 driven by the z1 model, then combining the branch
/// means with the priors.
inline McEntropyEstimate estimate_conditional_entropy(const ScoreModel& model,
                                                      const NoiseSchedule& schedule,
                                                      double prior_z0, std::size_t n_z0,
                                                      std::size_t n_z1, std::uint64_t seed,
                                                      const TrackerOptions& options = {}) {
  if (n_z0 == 0 || n_z1 == 0) throw ParameterError("sample counts must be at least 1");
  if (!(prior_z0 > 0.0 && prior_z0 < 1.0)) {
    throw ParameterError("prior P(z0) = " + std::to_string(prior_z0) + " outside (0, 1)");
  }
  const std::size_t steps = schedule.steps();
  McEntropyEstimate est;
  est.N_z0 = n_z0;
  est.N_z1 = n_z1;
  est.prior_z0 = prior_z0;
  est.seed = seed;

  const auto sum0 = detail::branch_sums(model, schedule, prior_z0, Branch::z0, n_z0, seed, options);
  const auto sum1 = detail::branch_sums(model, schedule, prior_z0, Branch::z1, n_z1, seed, options);
  est.H_bits.resize(steps + 1);
  est.H_z0_mean.resize(steps + 1);
  est.H_z1_mean.resize(steps + 1);
  for (std::size_t t = 0; t <= steps; ++t) {
    est.H_z0_mean[t] = sum0[t] / static_cast<double>(n_z0);
    est.H_z1_mean[t] = sum1[t] / static_cast<double>(n_z1);
    est.H_bits[t] = -(prior_z0 * est.H_z0_mean[t] + (1.0 - prior_z0) * est.H_z1_mean[t]);
  }
  est.H_bits[steps] = binary_entropy_bits(prior_z0);
  return est;
}

}  // namespace infotransfer
