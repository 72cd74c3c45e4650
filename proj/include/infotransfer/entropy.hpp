// Conditional entropy H(z | x_t) of a binary partition by Riemann-sum
// quadrature, its Jensen-Shannon counterpart, and entropy-rate profiles.
//
// Entropies are reported in bits. The JSD is accumulated in nats and converted.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "infotransfer/core.hpp"
#include "infotransfer/error.hpp"
#include "infotransfer/mixture.hpp"

namespace infotransfer {

inline constexpr std::size_t kDefaultGridPoints = 4096;
inline constexpr double kCoverageSigmas = 10.0;

/// n equally spaced nodes lo, lo + dx, ..., hi.
struct QuadratureGrid {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t n = kDefaultGridPoints;

  QuadratureGrid() = default;
  QuadratureGrid(double lo_, double hi_, std::size_t n_) : lo(lo_), hi(hi_), n(n_) {
    if (!(lo < hi)) throw ParameterError("quadrature grid needs lo < hi");
    if (n < 64) throw ParameterError("quadrature grid needs at least 64 points");
  }

  double spacing() const noexcept { return (hi - lo) / static_cast<double>(n - 1); }
  double node(std::size_t i) const noexcept { return lo + static_cast<double>(i) * spacing(); }
};

/// Bounds [min mu_kt - 10 sd_kt, max mu_kt + 10 sd_kt] at this noise level.
///
/// The point count starts at `n` and is raised until the spacing is at most
/// half the narrowest diffused standard deviation.
inline QuadratureGrid auto_grid(const MixtureModel& mixture, double alpha_bar,
                                std::size_t n = kDefaultGridPoints) {
  const auto comps = diffuse<double>(mixture, alpha_bar);
  double lo = comps.front().mean;
  double hi = lo;
  double narrowest = std::sqrt(comps.front().variance);
  for (const auto& c : comps) {
    const double sd = std::sqrt(c.variance);
    lo = std::min(lo, c.mean - kCoverageSigmas * sd);
    hi = std::max(hi, c.mean + kCoverageSigmas * sd);
    narrowest = std::min(narrowest, sd);
  }
  const double needed = std::ceil((hi - lo) / (0.5 * narrowest)) + 1.0;
  if (needed > static_cast<double>(n)) n = static_cast<std::size_t>(needed);
  return QuadratureGrid(lo, hi, n);
}

/// Throws QuadratureDomainError unless every diffused component's +/- 10 sd
/// interval lies inside the grid.
inline void check_coverage(const QuadratureGrid& grid, const MixtureModel& mixture,
                           double alpha_bar) {
  const QuadratureGrid need = auto_grid(mixture, alpha_bar, 64);
  const double slack = 1e-12 * std::max({1.0, std::abs(need.lo), std::abs(need.hi)});
  if (grid.lo > need.lo + slack || grid.hi < need.hi - slack) {
    throw QuadratureDomainError("grid [" + std::to_string(grid.lo) + ", " +
                                std::to_string(grid.hi) + "] does not cover [" +
                                std::to_string(need.lo) + ", " + std::to_string(need.hi) +
                                "] required at alpha_bar = " + std::to_string(alpha_bar));
  }
}

namespace detail {

// log sum_{k in set} w_k N(x; mu_kt, var_kt)
inline double subset_log_density(std::span<const DiffusedComponent<double>> comps,
                                  std::span<const std::size_t> set, double x,
                                  std::vector<double>& scratch) {
  scratch.clear();
  for (std::size_t k : set) {
    const auto& c = comps[k];
    if (c.weight > 0.0) scratch.push_back(std::log(c.weight) + log_normal_density(x, c.mean, c.variance));
  }
  return log_sum_exp<double>(scratch);
}

inline double log_add_exp(double a, double b) {
  const double top = std::max(a, b);
  if (!std::isfinite(top)) return top;
  return top + std::log1p(std::exp(-std::abs(a - b)));
}

// p log2 p with posteriors clamped to [1e-300, 1].
inline double plogp_bits(double p) {
  p = std::clamp(p, 1e-300, 1.0);
  return p * std::log2(p);
}

inline double partition_mass(const MixtureModel& mixture, std::span<const std::size_t> set) {
  double m = 0.0;
  for (std::size_t k : set) m += mixture.weight(k);
  return m;
}

}  // namespace detail

/// H(z | x_t) in bits, as the prior-weighted split
/// sum_i P(z_i) int p(x | z_i) h(P(z | x)) dx, with h the binary entropy.
inline double conditional_entropy_at(const MixtureModel& mixture, const Partition& partition,
                                     double alpha_bar, const QuadratureGrid& grid) {
  if (partition.mixture_size() != mixture.size()) {
    throw PartitionError("partition was built for a different mixture");
  }
  check_coverage(grid, mixture, alpha_bar);
  const auto comps = diffuse<double>(mixture, alpha_bar);
  const double mass0 = detail::partition_mass(mixture, partition.z0());
  const double mass1 = detail::partition_mass(mixture, partition.z1());
  const double log_mass0 = std::log(mass0);
  const double log_mass1 = std::log(mass1);

  std::vector<double> scratch;
  double acc0 = 0.0;
  double acc1 = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    const double l0 = detail::subset_log_density(comps, partition.z0(), x, scratch);
    const double l1 = detail::subset_log_density(comps, partition.z1(), x, scratch);
    const double u = detail::log_add_exp(l0, l1);
    if (!std::isfinite(u)) continue;
    const double p0 = std::exp(l0 - u);
    const double p1 = std::exp(l1 - u);
    const double h = -(detail::plogp_bits(p0) + detail::plogp_bits(p1));
    acc0 += std::exp(l0 - log_mass0) * h;
    acc1 += std::exp(l1 - log_mass1) * h;
  }
  const double dx = grid.spacing();
  const double bits = partition.prior_z0() * acc0 * dx + partition.prior_z1() * acc1 * dx;
  return std::clamp(bits, 0.0, 1.0);
}

inline double conditional_entropy_at(const MixtureModel& mixture, const Partition& partition,
                                     double alpha_bar) {
  return conditional_entropy_at(mixture, partition, alpha_bar, auto_grid(mixture, alpha_bar));
}

/// JSD(p(x_t | z0) || p(x_t | z1)) in bits, from
/// int (p0 + p1)/2 [q ln q + (1 - q) ln(1 - q)] dx + ln 2 with q = p0 / (p0 + p1).
inline double jsd_at(const MixtureModel& mixture, const Partition& partition, double alpha_bar,
                     const QuadratureGrid& grid) {
  if (partition.mixture_size() != mixture.size()) {
    throw PartitionError("partition was built for a different mixture");
  }
  check_coverage(grid, mixture, alpha_bar);
  const auto comps = diffuse<double>(mixture, alpha_bar);
  const double log_mass0 = std::log(detail::partition_mass(mixture, partition.z0()));
  const double log_mass1 = std::log(detail::partition_mass(mixture, partition.z1()));

  std::vector<double> scratch;
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    const double la = detail::subset_log_density(comps, partition.z0(), x, scratch) - log_mass0;
    const double lb = detail::subset_log_density(comps, partition.z1(), x, scratch) - log_mass1;
    const double lsum = detail::log_add_exp(la, lb);
    if (!std::isfinite(lsum)) continue;
    const double q0 = std::clamp(std::exp(la - lsum), 1e-300, 1.0);
    const double q1 = std::clamp(std::exp(lb - lsum), 1e-300, 1.0);
    const double half_sum = 0.5 * std::exp(lsum);
    acc += half_sum * (q0 * std::log(q0) + q1 * std::log(q1));
  }
  const double nats = acc * grid.spacing() + std::numbers::ln2;
  return nats / std::numbers::ln2;
}

inline double jsd_at(const MixtureModel& mixture, const Partition& partition, double alpha_bar) {
  return jsd_at(mixture, partition, alpha_bar, auto_grid(mixture, alpha_bar));
}

/// H(z | x_t) over a time grid together with its rate and the information transfer.
struct EntropyProfile {
  TimeGrid times;
  std::vector<double> alpha_bars;
  std::vector<double> H_bits;
  /// dH/ds along forward (noising) time; generation runs toward decreasing s.
  std::vector<double> rate_bits;
  /// H(z) - H(z | x_t).
  std::vector<double> transfer_bits;
  double prior_entropy_bits = 0.0;

  /// Index of the largest dH/ds.
  std::size_t peak_index() const {
    return static_cast<std::size_t>(std::max_element(rate_bits.begin(), rate_bits.end()) -
                                    rate_bits.begin());
  }
  double peak_time() const { return times.s(peak_index()); }
};

/// Central differences of `values` against `s`, one-sided at both ends.
inline std::vector<double> finite_difference_rate(std::span<const double> s,
                                                  std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<double> rate(n, 0.0);
  if (n < 2) return rate;
  rate.front() = (values[1] - values[0]) / (s[1] - s[0]);
  rate.back() = (values[n - 1] - values[n - 2]) / (s[n - 1] - s[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    rate[i] = (values[i + 1] - values[i - 1]) / (s[i + 1] - s[i - 1]);
  }
  return rate;
}

struct ProfileOptions {
  std::size_t stride = 1;
  std::size_t grid_points = kDefaultGridPoints;
};

inline EntropyProfile entropy_profile(const MixtureModel& mixture, const Partition& partition,
                                      const NoiseSchedule& schedule,
                                      const ProfileOptions& options = {}) {
  EntropyProfile profile{TimeGrid::strided(schedule.steps(), options.stride), {}, {}, {}, {}, 0.0};
  profile.prior_entropy_bits = binary_entropy_bits(partition.prior_z0());
  const std::size_t n = profile.times.size();
  profile.alpha_bars.resize(n);
  profile.H_bits.resize(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = profile.times.step(i);
    const double ab = schedule.alpha_bar(t);
    profile.alpha_bars[i] = ab;
    s[i] = profile.times.s(i);
    try {
      profile.H_bits[i] =
          conditional_entropy_at(mixture, partition, ab, auto_grid(mixture, ab, options.grid_points));
    } catch (const QuadratureDomainError& e) {
      throw QuadratureDomainError("step " + std::to_string(t) + ": " + e.what());
    } catch (const DegenerateDensityError& e) {
      throw DegenerateDensityError("step " + std::to_string(t) + ": " + e.what());
    }
  }
  profile.rate_bits = finite_difference_rate(s, profile.H_bits);
  profile.transfer_bits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    profile.transfer_bits[i] = profile.prior_entropy_bits - profile.H_bits[i];
  }
  return profile;
}

/// T_t = H(z) - H(z | x_t) for every time of the profile.
inline std::vector<double> information_transfer(const EntropyProfile& profile) {
  std::vector<double> out(profile.H_bits.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = profile.prior_entropy_bits - profile.H_bits[i];
  }
  return out;
}

}  // namespace infotransfer
