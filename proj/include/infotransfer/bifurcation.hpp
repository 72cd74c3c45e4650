// Fixed points of the reverse drift g(x) = c x - d/dx log p_t(x) across noise
// levels, and the noise levels where their number changes.
//
// Arithmetic is carried out in long double: near the unstable point between
// two well separated deltas at low noise |g'| reaches ~1e8, so a double-valued
// root cannot reach residuals of 1e-10.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "infotransfer/core.hpp"
#include "infotransfer/error.hpp"
#include "infotransfer/mixture.hpp"

namespace infotransfer {

using precise_t = long double;

inline constexpr double kDefaultDriftCoefficient = 0.5;
inline constexpr precise_t kResidualTolerance = 1e-10L;
inline constexpr precise_t kDedupRadius = 1e-6L;

enum class Stability { stable, unstable, degenerate };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::degenerate: return "degenerate";
  }
  return "?";
}

struct FixedPoint {
  precise_t x_star = 0;
  double alpha_bar = 0;
  /// |g(x_star)|
  precise_t residual = 0;
  /// stable iff g'(x_star) > 0, i.e. a minimum of -log p + c x^2 / 2.
  Stability stability = Stability::degenerate;
};

/// g(x) = c x - score(x) at one noise level.
class DriftField {
 public:
  DriftField(const MixtureModel& mixture, double alpha_bar,
             double coefficient = kDefaultDriftCoefficient)
      : field_(mixture, static_cast<precise_t>(alpha_bar)),
        alpha_bar_(alpha_bar),
        coefficient_(coefficient) {}

  precise_t operator()(precise_t x) const {
    return static_cast<precise_t>(coefficient_) * x - field_.score(x);
  }
  precise_t slope(precise_t x) const {
    return static_cast<precise_t>(coefficient_) - field_.score_derivative(x);
  }

  double alpha_bar() const noexcept { return alpha_bar_; }
  std::span<const DiffusedComponent<precise_t>> components() const noexcept {
    return field_.components();
  }

 private:
  DiffusedMixture<precise_t> field_;
  double alpha_bar_;
  double coefficient_;
};

template <std::floating_point Real = double>
Real drift_residual(const MixtureModel& mixture, Real alpha_bar, Real x,
                    double coefficient = kDefaultDriftCoefficient) {
  return static_cast<Real>(coefficient) * x - score<Real>(mixture, alpha_bar, x);
}

template <std::floating_point Real = double>
Real drift_residual_slope(const MixtureModel& mixture, Real alpha_bar, Real x,
                          double coefficient = kDefaultDriftCoefficient) {
  return static_cast<Real>(coefficient) - score_derivative<Real>(mixture, alpha_bar, x);
}

struct SearchBox {
  precise_t lo = -1;
  precise_t hi = 1;
};

/// Diffused means +/- 4 diffused standard deviations.
inline SearchBox default_search_box(const MixtureModel& mixture, double alpha_bar) {
  const auto comps = diffuse<precise_t>(mixture, static_cast<precise_t>(alpha_bar));
  SearchBox box{comps.front().mean, comps.front().mean};
  for (const auto& c : comps) {
    const precise_t sd = std::sqrt(c.variance);
    box.lo = std::min(box.lo, c.mean - 4 * sd);
    box.hi = std::max(box.hi, c.mean + 4 * sd);
  }
  return box;
}

struct FixedPointOptions {
  double drift_coefficient = kDefaultDriftCoefficient;
  std::size_t n_starts = 256;
  std::size_t max_iterations = 200;
};

struct FixedPointSearch {
  std::vector<FixedPoint> points;  ///< sorted by x_star
  std::vector<std::string> diagnostics;

  std::size_t count(Stability s) const {
    return static_cast<std::size_t>(std::count_if(
        points.begin(), points.end(), [s](const FixedPoint& p) { return p.stability == s; }));
  }
};

namespace detail {

// Moves to the neighbouring representable value while that lowers |g|.
inline precise_t polish_root(const DriftField& g, precise_t x) {
  precise_t best = std::abs(g(x));
  for (int dir : {-1, 1}) {
    const precise_t toward = dir < 0 ? -HUGE_VALL : HUGE_VALL;
    for (int i = 0; i < 8 && best > 0; ++i) {
      const precise_t cand = std::nextafter(x, toward);
      const precise_t r = std::abs(g(cand));
      if (r >= best) break;
      best = r;
      x = cand;
    }
  }
  return x;
}

// Newton steps accepted when they reduce |g|; otherwise backtracking along the
// descent direction of |g|, -sign(g) g', with halving.
inline std::optional<precise_t> hybrid_newton(const DriftField& g, precise_t x,
                                              const SearchBox& box, std::size_t max_iterations) {
  precise_t gx = g(x);
  const precise_t width = box.hi - box.lo;
  for (std::size_t it = 0; it < max_iterations && gx != 0; ++it) {
    const precise_t d = g.slope(x);
    const precise_t newton = -gx / d;
    precise_t next = x;
    precise_t gnext = gx;
    bool moved = false;
    if (std::isfinite(newton)) {
      next = x + newton;
      gnext = g(next);
      moved = std::abs(gnext) < std::abs(gx);
    }
    if (!moved) {
      if (d == 0) break;
      const precise_t dir = (gx > 0) == (d > 0) ? -1 : 1;
      precise_t len = std::isfinite(newton) ? std::min(std::abs(newton), width) : width;
      for (int h = 0; h < 80 && !moved; ++h, len /= 2) {
        next = x + dir * len;
        gnext = g(next);
        moved = std::abs(gnext) < std::abs(gx);
      }
      if (!moved) break;
    }
    const precise_t step = next - x;
    x = next;
    gx = gnext;
    if (x < box.lo - width || x > box.hi + width) return std::nullopt;
    if (std::abs(step) <= 1e-12L * std::max<precise_t>(1, std::abs(x))) break;
  }
  return x;
}

// Newton inside a sign-change bracket, falling back to bisection whenever the
// step leaves the bracket or fails to halve |g|.
inline precise_t bracketed_root(const DriftField& g, precise_t a, precise_t b) {
  precise_t ga = g(a);
  precise_t x = (a + b) / 2;
  for (int it = 0; it < 400; ++it) {
    const precise_t gx = g(x);
    if (gx == 0) return x;
    if ((gx > 0) == (ga > 0)) {
      a = x;
      ga = gx;
    } else {
      b = x;
    }
    const precise_t mid = (a + b) / 2;
    if (mid == a || mid == b) break;
    const precise_t d = g.slope(x);
    const precise_t next = x - gx / d;
    const bool inside = std::isfinite(next) && next > std::min(a, b) && next < std::max(a, b);
    x = inside && std::abs(g(next)) < std::abs(gx) / 2 ? next : mid;
  }
  return x;
}

inline Stability classify(const DriftField& g, precise_t x) {
  const precise_t s = g.slope(x);
  if (s > 0) return Stability::stable;
  if (s < 0) return Stability::unstable;
  return Stability::degenerate;
}

}  // namespace detail

/// All fixed points of the drift inside `box`, each with |g| < 1e-10.
///
/// Seeds are n_starts equally spaced points. Every sign change between
/// neighbouring seeds is solved inside its bracket and every seed is also
/// run through the unbracketed hybrid iteration; results are deduplicated.
inline FixedPointSearch find_fixed_points(const MixtureModel& mixture, double alpha_bar,
                                          const SearchBox& box,
                                          const FixedPointOptions& options = {}) {
  if (!(box.lo < box.hi)) throw ParameterError("search box needs lo < hi");
  if (options.n_starts < 2) throw ParameterError("fixed-point search needs at least 2 starts");
  const DriftField g(mixture, alpha_bar, options.drift_coefficient);

  std::vector<precise_t> seeds(options.n_starts);
  std::vector<precise_t> values(options.n_starts);
  const precise_t step = (box.hi - box.lo) / static_cast<precise_t>(options.n_starts - 1);
  for (std::size_t i = 0; i < options.n_starts; ++i) {
    seeds[i] = i + 1 == options.n_starts ? box.hi : box.lo + static_cast<precise_t>(i) * step;
    values[i] = g(seeds[i]);
  }

  std::vector<precise_t> candidates;
  for (std::size_t i = 0; i < options.n_starts; ++i) {
    if (values[i] == 0) candidates.push_back(seeds[i]);
    if (i + 1 < options.n_starts && values[i] != 0 && values[i + 1] != 0 &&
        (values[i] > 0) != (values[i + 1] > 0)) {
      candidates.push_back(detail::bracketed_root(g, seeds[i], seeds[i + 1]));
    }
    if (auto r = detail::hybrid_newton(g, seeds[i], box, options.max_iterations)) {
      candidates.push_back(*r);
    }
  }

  FixedPointSearch result;
  std::size_t rejected = 0;
  std::vector<FixedPoint> found;
  for (precise_t c : candidates) {
    const precise_t x = detail::polish_root(g, c);
    const precise_t r = std::abs(g(x));
    if (!(r < kResidualTolerance) || x < box.lo || x > box.hi) {
      ++rejected;
      continue;
    }
    found.push_back({x, alpha_bar, r, detail::classify(g, x)});
  }
  std::sort(found.begin(), found.end(),
            [](const FixedPoint& a, const FixedPoint& b) { return a.x_star < b.x_star; });
  for (const auto& p : found) {
    if (!result.points.empty() && p.x_star - result.points.back().x_star < kDedupRadius) {
      if (p.residual < result.points.back().residual) result.points.back() = p;
      continue;
    }
    result.points.push_back(p);
  }
  if (result.points.empty()) {
    result.diagnostics.push_back("no fixed point converged at alpha_bar = " +
                                 std::to_string(alpha_bar) + " (" + std::to_string(rejected) +
                                 " candidates rejected)");
  }
  return result;
}

inline FixedPointSearch find_fixed_points(const MixtureModel& mixture, double alpha_bar,
                                          const FixedPointOptions& options = {}) {
  return find_fixed_points(mixture, alpha_bar, default_search_box(mixture, alpha_bar), options);
}

/// Noise level bracket [t_low_noise, t_high_noise] (adjacent steps after
/// refinement) across which the number of fixed points changes.
struct CriticalLevel {
  std::size_t t_low_noise = 0;
  std::size_t t_high_noise = 0;
  double s = 0;  ///< midpoint in normalized time
  std::size_t count_low_noise = 0;
  std::size_t count_high_noise = 0;
};

struct BifurcationLevel {
  std::size_t t = 0;
  double s = 0;
  double alpha_bar = 0;
  std::vector<FixedPoint> points;
};

struct BifurcationDiagram {
  std::vector<BifurcationLevel> levels;  ///< increasing t
  std::vector<CriticalLevel> critical;   ///< increasing t
  std::vector<std::string> diagnostics;
};

/// Fixed points at every strided step of the schedule, with count changes
/// refined by bisection to adjacent steps.
inline BifurcationDiagram trace_bifurcations(const MixtureModel& mixture,
                                             const NoiseSchedule& schedule, std::size_t stride,
                                             const FixedPointOptions& options = {}) {
  const TimeGrid grid = TimeGrid::strided(schedule.steps(), stride);
  const double total = static_cast<double>(schedule.steps());
  auto solve = [&](std::size_t t) {
    try {
      return find_fixed_points(mixture, schedule.alpha_bar(t), options);
    } catch (const Error& e) {
      throw Error("step " + std::to_string(t) + ": " + e.what());
    }
  };

  BifurcationDiagram diagram;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t t = grid.step(i);
    auto search = solve(t);
    for (auto& d : search.diagnostics) diagram.diagnostics.push_back("step " + std::to_string(t) + ": " + d);
    diagram.levels.push_back({t, grid.s(i), schedule.alpha_bar(t), std::move(search.points)});
  }
  for (std::size_t i = 0; i + 1 < diagram.levels.size(); ++i) {
    std::size_t lo = diagram.levels[i].t;
    std::size_t hi = diagram.levels[i + 1].t;
    const std::size_t count_lo = diagram.levels[i].points.size();
    std::size_t count_hi = diagram.levels[i + 1].points.size();
    if (count_lo == count_hi) continue;
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const std::size_t c = solve(mid).points.size();
      if (c == count_lo) {
        lo = mid;
      } else {
        hi = mid;
        count_hi = c;
      }
    }
    diagram.critical.push_back({lo, hi, (static_cast<double>(lo) + static_cast<double>(hi)) / (2 * total),
                                count_lo, count_hi});
  }
  return diagram;
}

/// True when an unstable fixed point separates the diffused locations of
/// components a and b.
inline bool branches_separated(const MixtureModel& mixture, double alpha_bar, std::size_t a,
                               std::size_t b, const FixedPointOptions& options = {}) {
  const auto search = find_fixed_points(mixture, alpha_bar, options);
  const precise_t root_ab = std::sqrt(static_cast<precise_t>(alpha_bar));
  const precise_t ma = root_ab * mixture.mean(a);
  const precise_t mb = root_ab * mixture.mean(b);
  const precise_t lo = std::min(ma, mb);
  const precise_t hi = std::max(ma, mb);
  return std::any_of(search.points.begin(), search.points.end(), [&](const FixedPoint& p) {
    return p.stability == Stability::unstable && p.x_star > lo && p.x_star < hi;
  });
}

/// Noise level at which the branches of neighbouring components a and b split,
/// i.e. the highest-noise step with an unstable fixed point between them,
/// refined to adjacent steps. Empty when they never separate.
inline std::optional<CriticalLevel> locate_split(const MixtureModel& mixture,
                                                 const NoiseSchedule& schedule, std::size_t a,
                                                 std::size_t b, std::size_t stride = 10,
                                                 const FixedPointOptions& options = {}) {
  if (a >= mixture.size() || b >= mixture.size() || a == b) {
    throw ParameterError("locate_split needs two distinct component indices");
  }
  const TimeGrid grid = TimeGrid::strided(schedule.steps(), stride);
  auto separated = [&](std::size_t t) {
    return branches_separated(mixture, schedule.alpha_bar(t), a, b, options);
  };
  std::optional<std::size_t> last;
  for (std::size_t i = grid.size(); i-- > 0;) {
    if (separated(grid.step(i))) {
      last = i;
      break;
    }
  }
  if (!last) return std::nullopt;
  std::size_t lo = grid.step(*last);
  if (*last + 1 == grid.size()) {
    return CriticalLevel{lo, lo, schedule.normalized_time(lo), 0, 0};
  }
  std::size_t hi = grid.step(*last + 1);
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (separated(mid) ? lo : hi) = mid;
  }
  const double total = static_cast<double>(schedule.steps());
  return CriticalLevel{lo, hi, (static_cast<double>(lo) + static_cast<double>(hi)) / (2 * total),
                       find_fixed_points(mixture, schedule.alpha_bar(lo), options).points.size(),
                       find_fixed_points(mixture, schedule.alpha_bar(hi), options).points.size()};
}

}  // namespace infotransfer
