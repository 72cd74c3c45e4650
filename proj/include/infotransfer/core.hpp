// Shared domain types: 1-D Gaussian mixtures, variance-preserving noise
// schedules, binary class partitions and normalized time grids.
//
// All types validate on construction and are immutable afterwards.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infotransfer/error.hpp"

namespace infotransfer {

using IndexSet = std::vector<std::size_t>;

/// Data distribution p(x_0) = sum_k w_k N(x_0 | mean_k, var_k).
///
/// Zero variances are allowed and denote delta components.
class MixtureModel {
 public:
  MixtureModel(std::vector<double> weights, std::vector<double> means,
               std::vector<double> variances)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        variances_(std::move(variances)) {
    if (weights_.empty()) throw ParameterError("mixture needs at least one component");
    if (means_.size() != weights_.size() || variances_.size() != weights_.size()) {
      throw ParameterError("mixture weights, means and variances differ in length (" +
                           std::to_string(weights_.size()) + ", " +
                           std::to_string(means_.size()) + ", " +
                           std::to_string(variances_.size()) + ")");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      if (!std::isfinite(weights_[k]) || weights_[k] < 0.0) {
        throw ParameterError("mixture weight " + std::to_string(k) + " is negative or non-finite");
      }
      if (!std::isfinite(means_[k])) {
        throw ParameterError("mixture mean " + std::to_string(k) + " is non-finite");
      }
      if (!std::isfinite(variances_[k]) || variances_[k] < 0.0) {
        throw ParameterError("mixture variance " + std::to_string(k) +
                             " is negative or non-finite");
      }
      total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ParameterError("mixture weights sum to " + std::to_string(total) + ", expected 1");
    }
  }

  /// Equal-weight mixture of delta components at the given locations.
  static MixtureModel deltas(std::vector<double> locations) {
    const std::size_t k = locations.size();
    if (k == 0) throw ParameterError("mixture needs at least one component");
    return MixtureModel(std::vector<double>(k, 1.0 / static_cast<double>(k)),
                        std::move(locations), std::vector<double>(k, 0.0));
  }

  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> means() const noexcept { return means_; }
  std::span<const double> variances() const noexcept { return variances_; }

  double weight(std::size_t k) const { return weights_.at(k); }
  double mean(std::size_t k) const { return means_.at(k); }
  double variance(std::size_t k) const { return variances_.at(k); }

  bool has_delta() const noexcept {
    return std::any_of(variances_.begin(), variances_.end(), [](double v) { return v == 0.0; });
  }

  friend bool operator==(const MixtureModel&, const MixtureModel&) = default;

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> variances_;
};

/// Per-step noise increments beta_t (t = 1..T) and cumulative signal
/// retention alpha_bar_t = prod_{tau <= t} (1 - beta_tau), with alpha_bar_0 = 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw ParameterError("noise schedule needs at least one step");
    alpha_bars_.resize(betas_.size() + 1);
    alpha_bars_[0] = 1.0;
    for (std::size_t i = 0; i < betas_.size(); ++i) {
      const double b = betas_[i];
      if (!(b > 0.0 && b < 1.0)) {
        throw ParameterError("beta at step " + std::to_string(i + 1) + " = " +
                             std::to_string(b) + " lies outside (0, 1)");
      }
      alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - b);
    }
  }

  std::size_t steps() const noexcept { return betas_.size(); }

  /// beta_t for 1 <= t <= T.
  double beta(std::size_t t) const {
    if (t == 0 || t > betas_.size()) {
      throw ParameterError("step " + std::to_string(t) + " outside 1.." +
                           std::to_string(betas_.size()));
    }
    return betas_[t - 1];
  }

  /// alpha_bar_t for 0 <= t <= T.
  double alpha_bar(std::size_t t) const {
    if (t > betas_.size()) {
      throw ParameterError("step " + std::to_string(t) + " outside 0.." +
                           std::to_string(betas_.size()));
    }
    return alpha_bars_[t];
  }

  double normalized_time(std::size_t t) const noexcept {
    return static_cast<double>(t) / static_cast<double>(betas_.size());
  }

  std::span<const double> betas() const noexcept { return betas_; }
  /// Length T + 1, index 0 holds alpha_bar_0 = 1.
  std::span<const double> alpha_bars() const noexcept { return alpha_bars_; }

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.betas_ == b.betas_;
  }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// Linearly spaced betas from beta_start to beta_end inclusive.
inline NoiseSchedule linear_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 2) throw ParameterError("linear schedule needs T >= 2, got " + std::to_string(steps));
  if (!(beta_start > 0.0)) {
    throw ParameterError("beta_start = " + std::to_string(beta_start) + " must be positive");
  }
  if (!(beta_end < 1.0)) {
    throw ParameterError("beta_end = " + std::to_string(beta_end) + " must be below 1");
  }
  if (!(beta_start <= beta_end)) {
    throw ParameterError("beta_start = " + std::to_string(beta_start) +
                         " exceeds beta_end = " + std::to_string(beta_end));
  }
  std::vector<double> betas(steps);
  const double span = beta_end - beta_start;
  const double last = static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    betas[i] = beta_start + span * (static_cast<double>(i) / last);
  }
  betas.back() = beta_end;
  return NoiseSchedule(std::move(betas));
}

/// Binary split of component indices into z0 and z1 with priors renormalized
/// over their union.
class Partition {
 public:
  std::span<const std::size_t> z0() const noexcept { return z0_; }
  std::span<const std::size_t> z1() const noexcept { return z1_; }
  double prior_z0() const noexcept { return prior_z0_; }
  double prior_z1() const noexcept { return prior_z1_; }
  /// Number of components in the mixture this partition was built for.
  std::size_t mixture_size() const noexcept { return mixture_size_; }

  /// True when z0 and z1 together cover every component.
  bool covers_all() const noexcept { return z0_.size() + z1_.size() == mixture_size_; }

  /// Sorted union z0 u z1.
  IndexSet members() const {
    IndexSet all(z0_);
    all.insert(all.end(), z1_.begin(), z1_.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  friend Partition make_partition(const MixtureModel&, IndexSet, IndexSet);
  Partition() = default;

  IndexSet z0_;
  IndexSet z1_;
  double prior_z0_ = 0.5;
  double prior_z1_ = 0.5;
  std::size_t mixture_size_ = 0;
};

inline Partition make_partition(const MixtureModel& mixture, IndexSet z0, IndexSet z1) {
  if (z0.empty()) throw PartitionError("partition set z0 is empty");
  if (z1.empty()) throw PartitionError("partition set z1 is empty");
  const std::size_t k = mixture.size();
  std::vector<int> owner(k, -1);
  auto claim = [&](const IndexSet& set, int side) {
    for (std::size_t idx : set) {
      if (idx >= k) {
        throw PartitionError("partition index " + std::to_string(idx) +
                             " out of range for " + std::to_string(k) + " components");
      }
      if (owner[idx] != -1) {
        throw PartitionError("partition index " + std::to_string(idx) +
                             (owner[idx] == side ? " repeated" : " appears in both z0 and z1"));
      }
      owner[idx] = side;
    }
  };
  claim(z0, 0);
  claim(z1, 1);
  std::sort(z0.begin(), z0.end());
  std::sort(z1.begin(), z1.end());

  double mass0 = 0.0;
  double mass1 = 0.0;
  for (std::size_t idx : z0) mass0 += mixture.weight(idx);
  for (std::size_t idx : z1) mass1 += mixture.weight(idx);
  if (!(mass0 + mass1 > 0.0)) throw PartitionError("partition covers only zero-weight components");

  Partition p;
  p.z0_ = std::move(z0);
  p.z1_ = std::move(z1);
  p.prior_z0_ = mass0 / (mass0 + mass1);
  p.prior_z1_ = 1.0 - p.prior_z0_;
  p.mixture_size_ = k;
  return p;
}

inline Partition one_vs_one(const MixtureModel& mixture, std::size_t a, std::size_t b) {
  return make_partition(mixture, {a}, {b});
}

/// `target` against every other component.
inline Partition one_vs_rest(const MixtureModel& mixture, std::size_t target) {
  IndexSet rest;
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    if (k != target) rest.push_back(k);
  }
  return make_partition(mixture, {target}, std::move(rest));
}

/// Components with mean below `threshold` against those at or above it.
inline Partition split_at(const MixtureModel& mixture, double threshold) {
  IndexSet lower;
  IndexSet upper;
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    (mixture.mean(k) < threshold ? lower : upper).push_back(k);
  }
  return make_partition(mixture, std::move(lower), std::move(upper));
}

/// Strictly increasing step indices with normalized time s = t / T in (0, 1].
class TimeGrid {
 public:
  /// t = stride, 2 stride, ..., with T appended when it is not a multiple.
  static TimeGrid strided(std::size_t total_steps, std::size_t stride) {
    if (total_steps == 0) throw ParameterError("time grid needs T >= 1");
    if (stride == 0 || stride > total_steps) {
      throw ParameterError("stride " + std::to_string(stride) + " outside 1.." +
                           std::to_string(total_steps));
    }
    TimeGrid grid;
    grid.total_ = total_steps;
    for (std::size_t t = stride; t <= total_steps; t += stride) grid.steps_.push_back(t);
    if (grid.steps_.back() != total_steps) grid.steps_.push_back(total_steps);
    return grid;
  }

  std::size_t size() const noexcept { return steps_.size(); }
  std::size_t total_steps() const noexcept { return total_; }
  std::span<const std::size_t> steps() const noexcept { return steps_; }
  std::size_t step(std::size_t i) const { return steps_.at(i); }
  double s(std::size_t i) const {
    return static_cast<double>(steps_.at(i)) / static_cast<double>(total_);
  }

 private:
  std::vector<std::size_t> steps_;
  std::size_t total_ = 0;
};

/// Binary entropy in bits of a Bernoulli(p) variable; 0 log 0 = 0.
inline double binary_entropy_bits(double p) {
  auto term = [](double q) { return q > 0.0 ? -q * std::log2(q) : 0.0; };
  return term(p) + term(1.0 - p);
}

}  // namespace infotransfer
