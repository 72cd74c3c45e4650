// Closed-form variance-preserving diffusion of a 1-D Gaussian mixture.
//
// Under the forward kernel N(x_t | sqrt(a) x_0, 1 - a) with a = alpha_bar_t,
// component k stays Gaussian with mean sqrt(a) mu_k and variance
// a var_k + (1 - a). Everything here follows from that.
//
// The functions are templated on the arithmetic type so that root finding can
// run in extended precision; the mixture parameters themselves stay double.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infotransfer/core.hpp"
#include "infotransfer/error.hpp"

namespace infotransfer {

template <std::floating_point Real = double>
struct DiffusedComponent {
  Real mean;
  Real variance;
  Real weight;
};

template <std::floating_point Real = double>
DiffusedComponent<Real> diffuse_component(Real mean, Real variance, Real alpha_bar,
                                          Real weight = Real(1)) {
  if (!(variance >= Real(0))) throw ParameterError("component variance must be non-negative");
  if (!(alpha_bar >= Real(0) && alpha_bar <= Real(1))) {
    throw ParameterError("alpha_bar = " + std::to_string(static_cast<double>(alpha_bar)) +
                         " outside [0, 1]");
  }
  if (alpha_bar == Real(1) && variance == Real(0)) {
    throw DegenerateDensityError("delta component at alpha_bar = 1 has no density");
  }
  using std::sqrt;
  return {sqrt(alpha_bar) * mean, alpha_bar * variance + (Real(1) - alpha_bar), weight};
}

template <std::floating_point Real = double>
std::vector<DiffusedComponent<Real>> diffuse(const MixtureModel& mixture, Real alpha_bar) {
  std::vector<DiffusedComponent<Real>> out;
  out.reserve(mixture.size());
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    out.push_back(diffuse_component<Real>(static_cast<Real>(mixture.mean(k)),
                                          static_cast<Real>(mixture.variance(k)), alpha_bar,
                                          static_cast<Real>(mixture.weight(k))));
  }
  return out;
}

template <std::floating_point Real>
Real log_normal_density(Real x, Real mean, Real variance) {
  using std::log;
  const Real d = x - mean;
  return Real(-0.5) * (log(Real(2) * std::numbers::pi_v<Real> * variance) + d * d / variance);
}

template <std::floating_point Real>
Real log_sum_exp(std::span<const Real> values) {
  if (values.empty()) return -std::numeric_limits<Real>::infinity();
  const Real top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  Real acc = 0;
  for (Real v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

namespace detail {

// Log prior-weighted likelihood differences relative to the strongest member of
// `subset`. Pairs with equal variance use the factored quadratic difference
// (mu_r - mu_k)(2x - mu_k - mu_r), which keeps full relative precision when the
// individual quadratic terms are huge (separated deltas at low noise).
template <std::floating_point Real>
void relative_log_weights(std::span<const DiffusedComponent<Real>> comps,
                          std::span<const std::size_t> subset, Real x, std::vector<Real>& rel) {
  using std::log;
  rel.resize(subset.size());
  std::vector<Real>& raw = rel;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& c = comps[subset[i]];
    raw[i] = (c.weight > Real(0) ? log(c.weight) : -std::numeric_limits<Real>::infinity()) +
             log_normal_density(x, c.mean, c.variance);
  }
  const auto ref_it = std::max_element(raw.begin(), raw.end());
  if (ref_it == raw.end() || !std::isfinite(*ref_it)) {
    throw UndefinedPosteriorError("component subset carries no probability mass");
  }
  const auto& ref = comps[subset[static_cast<std::size_t>(ref_it - raw.begin())]];
  const Real ref_raw = *ref_it;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& c = comps[subset[i]];
    if (c.weight <= Real(0)) {
      rel[i] = -std::numeric_limits<Real>::infinity();
    } else if (c.variance == ref.variance) {
      const Real quad = (ref.mean - c.mean) * (Real(2) * x - c.mean - ref.mean);
      rel[i] = log(c.weight / ref.weight) - quad / (Real(2) * c.variance);
    } else {
      rel[i] = raw[i] - ref_raw;
    }
  }
}

template <std::floating_point Real>
std::vector<Real> normalized_weights(std::span<const DiffusedComponent<Real>> comps,
                                     std::span<const std::size_t> subset, Real x) {
  std::vector<Real> w;
  relative_log_weights<Real>(comps, subset, x, w);
  Real total = 0;
  for (Real& v : w) {
    v = std::exp(v);
    total += v;
  }
  for (Real& v : w) v /= total;
  return w;
}

// sum_k w_k (mu_k - x) / var_k over `subset`, using `scratch` for the weights.
template <std::floating_point Real>
Real subset_score(std::span<const DiffusedComponent<Real>> comps,
                  std::span<const std::size_t> subset, Real x, std::vector<Real>& scratch) {
  if (subset.empty()) throw ParameterError("score needs a non-empty component subset");
  relative_log_weights<Real>(comps, subset, x, scratch);
  Real total = 0;
  Real weighted = 0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& c = comps[subset[i]];
    const Real w = std::exp(scratch[i]);
    total += w;
    weighted += w * (c.mean - x) / c.variance;
  }
  return weighted / total;
}

inline IndexSet all_components(std::size_t k) {
  IndexSet all(k);
  for (std::size_t i = 0; i < k; ++i) all[i] = i;
  return all;
}

}  // namespace detail

/// log N(x; mu_kt, var_kt) for every component.
template <std::floating_point Real = double>
std::vector<Real> class_log_likelihoods(const MixtureModel& mixture, Real alpha_bar, Real x) {
  const auto comps = diffuse<Real>(mixture, alpha_bar);
  std::vector<Real> out(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    out[k] = log_normal_density(x, comps[k].mean, comps[k].variance);
  }
  return out;
}

template <std::floating_point Real = double>
Real log_marginal_pdf(const MixtureModel& mixture, Real alpha_bar, Real x) {
  auto terms = class_log_likelihoods<Real>(mixture, alpha_bar, x);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    terms[k] += std::log(static_cast<Real>(mixture.weight(k)));
  }
  return log_sum_exp<Real>(terms);
}

template <std::floating_point Real = double>
Real marginal_pdf(const MixtureModel& mixture, Real alpha_bar, Real x) {
  return std::exp(log_marginal_pdf<Real>(mixture, alpha_bar, x));
}

/// P(c_k | x_t) for every component, normalized with log-sum-exp.
template <std::floating_point Real = double>
std::vector<Real> class_posteriors(const MixtureModel& mixture, Real alpha_bar, Real x) {
  const auto comps = diffuse<Real>(mixture, alpha_bar);
  const IndexSet all = detail::all_components(comps.size());
  return detail::normalized_weights<Real>(comps, all, x);
}

/// (P(z0 | x), P(z1 | x)) from a class posterior vector, renormalized over z0 u z1.
inline std::pair<double, double> partition_posterior(const Partition& partition,
                                                     std::span<const double> posteriors) {
  if (posteriors.size() != partition.mixture_size()) {
    throw ParameterError("posterior vector has " + std::to_string(posteriors.size()) +
                         " entries, partition expects " +
                         std::to_string(partition.mixture_size()));
  }
  double m0 = 0.0;
  double m1 = 0.0;
  for (std::size_t k : partition.z0()) m0 += posteriors[k];
  for (std::size_t k : partition.z1()) m1 += posteriors[k];
  const double total = m0 + m1;
  if (!(total > std::numeric_limits<double>::min())) {
    throw UndefinedPosteriorError("partition posteriors vanish at this point");
  }
  const double p0 = m0 / total;
  return {p0, 1.0 - p0};
}

/// Conditioning label for scores and noise predictions.
struct Label {
  enum class Kind { z0, z1, null, component };
  Kind kind = Kind::null;
  std::size_t component = 0;

  static constexpr Label z0() { return {Kind::z0, 0}; }
  static constexpr Label z1() { return {Kind::z1, 0}; }
  static constexpr Label null() { return {Kind::null, 0}; }
  static constexpr Label of_component(std::size_t k) { return {Kind::component, k}; }

  friend bool operator==(const Label&, const Label&) = default;
};

inline std::string to_string(Label label) {
  switch (label.kind) {
    case Label::Kind::z0: return "z0";
    case Label::Kind::z1: return "z1";
    case Label::Kind::null: return "null";
    case Label::Kind::component: return "c" + std::to_string(label.component);
  }
  return "?";
}

/// Component subset a label refers to. z0/z1 need a partition; null is everything.
inline IndexSet label_components(Label label, std::size_t mixture_size,
                                 const Partition* partition = nullptr) {
  switch (label.kind) {
    case Label::Kind::null: return detail::all_components(mixture_size);
    case Label::Kind::component:
      if (label.component >= mixture_size) {
        throw ParameterError("component label " + std::to_string(label.component) +
                             " out of range");
      }
      return {label.component};
    case Label::Kind::z0:
    case Label::Kind::z1: {
      if (partition == nullptr) throw ParameterError("z0/z1 labels need a partition");
      if (partition->mixture_size() != mixture_size) {
        throw PartitionError("partition was built for a different mixture");
      }
      auto side = label.kind == Label::Kind::z0 ? partition->z0() : partition->z1();
      return IndexSet(side.begin(), side.end());
    }
  }
  return {};
}

/// Diffused mixture at one noise level with scratch storage for repeated
/// evaluation. Not safe to share between threads.
template <std::floating_point Real = double>
class DiffusedMixture {
 public:
  DiffusedMixture(const MixtureModel& mixture, Real alpha_bar)
      : comps_(diffuse<Real>(mixture, alpha_bar)),
        all_(detail::all_components(mixture.size())) {}

  std::span<const DiffusedComponent<Real>> components() const noexcept { return comps_; }

  /// Score of the sub-mixture over `subset`.
  Real score(Real x, std::span<const std::size_t> subset) const {
    return detail::subset_score<Real>(comps_, subset, x, w_);
  }

  Real score(Real x) const { return score(x, all_); }

  /// d/dx of the full-marginal score.
  ///
  /// With s_k = (mu_k - x) / var_k and posterior weights w_k this is
  /// -sum w_k / var_k + Var_w[s_k].
  Real score_derivative(Real x) const {
    weights(x, all_);
    Real mean_slope = 0;
    Real curvature = 0;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      mean_slope += w_[k] * (comps_[k].mean - x) / comps_[k].variance;
      curvature -= w_[k] / comps_[k].variance;
    }
    Real spread = 0;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
      const Real d = (comps_[k].mean - x) / comps_[k].variance - mean_slope;
      spread += w_[k] * d * d;
    }
    return curvature + spread;
  }

  /// Posterior weights within `subset`, normalized to sum 1.
  std::span<const Real> weights(Real x, std::span<const std::size_t> subset) const {
    detail::relative_log_weights<Real>(comps_, subset, x, w_);
    Real total = 0;
    for (Real& v : w_) {
      v = std::exp(v);
      total += v;
    }
    for (Real& v : w_) v /= total;
    return w_;
  }

 private:
  std::vector<DiffusedComponent<Real>> comps_;
  IndexSet all_;
  mutable std::vector<Real> w_;
};

/// Exact score d/dx log p(x_t | subset) of the sub-mixture over `subset`.
template <std::floating_point Real = double>
Real score(const MixtureModel& mixture, Real alpha_bar, Real x,
           std::span<const std::size_t> subset) {
  return DiffusedMixture<Real>(mixture, alpha_bar).score(x, subset);
}

/// Score of the full marginal p(x_t).
template <std::floating_point Real = double>
Real score(const MixtureModel& mixture, Real alpha_bar, Real x) {
  return DiffusedMixture<Real>(mixture, alpha_bar).score(x);
}

template <std::floating_point Real = double>
Real score(const MixtureModel& mixture, Real alpha_bar, Real x, Label label,
           const Partition* partition = nullptr) {
  const IndexSet subset = label_components(label, mixture.size(), partition);
  return score<Real>(mixture, alpha_bar, x, subset);
}

template <std::floating_point Real = double>
Real score_derivative(const MixtureModel& mixture, Real alpha_bar, Real x) {
  return DiffusedMixture<Real>(mixture, alpha_bar).score_derivative(x);
}

}  // namespace infotransfer
