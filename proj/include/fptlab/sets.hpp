#pragma once

// Convex bounded bodies: membership, seeded sampling, diameters, distance
// bounds and the recentering witnesses behind t(C).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/error.hpp"
#include "fptlab/operators.hpp"
#include "fptlab/point.hpp"

namespace fptlab {

enum class BoundType { exact, upper, lower };

inline std::string_view to_string(BoundType b) {
  switch (b) {
    case BoundType::exact: return "exact";
    case BoundType::upper: return "upper";
    case BoundType::lower: return "lower";
  }
  return "?";
}

template <Point P>
struct ConvexBody {
  std::string name;
  nlohmann::json spec;  // catalog address, e.g. {"set": "cone_hull", "a": 0.5}
  std::function<std::optional<std::string>(const P&, double tol)> violation;
  Sampler<P> sample;
  std::optional<double> diameter;
  /// Closed-form point of the body realizing the t(C) bound for a sequence
  /// of members converging in measure to `limit`. Empty: sampled fallback.
  std::function<P(const P& limit, std::span<const P> seq)> witness;
  /// Certified lower bound on inf_{c in body} ||x - c||.
  std::function<double(const P&)> distance_lower_bound;
  bool distance_bound_exact = false;
  /// Value of t(C) established in closed form for this body, if any.
  std::optional<double> t_cited;
};

template <Point P>
std::optional<std::string> membership_violation(const ConvexBody<P>& body, const P& x,
                                                double tol = default_tolerance) {
  return body.violation(x, tol);
}

template <Point P>
bool membership(const ConvexBody<P>& body, const P& x, double tol = default_tolerance) {
  return !body.violation(x, tol);
}

template <Point P>
double diameter(const ConvexBody<P>& body) {
  if (!body.diameter) throw std::invalid_argument(fmt::format("diameter of '{}' is not known", body.name));
  return *body.diameter;
}

template <Point P>
struct Recentered {
  P point;
  BoundType bound_type = BoundType::exact;
};

/// limsup_tail ||c - x_n||
template <Point P>
double limsup_distance(const P& c, std::span<const P> seq, double window_fraction = 0.5) {
  if (seq.empty()) throw std::invalid_argument("limsup_distance over an empty sequence");
  std::vector<double> d;
  d.reserve(seq.size());
  for (const auto& x : seq) d.push_back(distance(c, x));
  return limsup_tail(d, window_fraction);
}

struct RecenterOptions {
  std::size_t candidates = 256;
  std::uint64_t seed = 0;
  double window_fraction = 0.5;
};

/// Best of `candidates` body samples by limsup_tail ||c - x_n||. Only an upper
/// bound on the infimum over the body.
template <Point P>
Recentered<P> recenter_by_sampling(const ConvexBody<P>& body, std::span<const P> seq,
                                   const RecenterOptions& opts = {}) {
  if (seq.empty()) throw std::invalid_argument("recenter needs a nonempty sequence");
  if (opts.candidates < 1) throw std::invalid_argument("recenter needs at least one candidate");
  std::optional<P> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < opts.candidates; ++k) {
    P c = body.sample(opts.seed + k);
    const double v = limsup_distance(c, seq, opts.window_fraction);
    if (v < best_value) {
      best_value = v;
      best = std::move(c);
    }
  }
  return {*best, BoundType::upper};
}

/// Point of the body close (in the limsup sense) to a sequence of members
/// whose in-measure limit `x` may lie outside the body.
template <Point P>
Recentered<P> recenter(const ConvexBody<P>& body, const P& x, std::span<const P> seq,
                       const RecenterOptions& opts = {}) {
  if (seq.empty()) throw std::invalid_argument("recenter needs a nonempty sequence");
  if (body.witness) return {body.witness(x, seq), BoundType::exact};
  return recenter_by_sampling(body, seq, opts);
}

struct DistanceBound {
  double value = 0.0;
  BoundType bound_type = BoundType::upper;
  double lower = 0.0;  // certified lower bound, 0 when the body has none
};

/// Upper bound on inf_{c in body} ||x - c||: min over body samples, the
/// recentering witness and x itself when it is a member. Reported as exact
/// when it meets the body's certified lower bound.
template <Point P>
DistanceBound distance_to_set(const ConvexBody<P>& body, const P& x, std::size_t n_samples, std::uint64_t seed,
                              double tol = default_tolerance) {
  if (n_samples < 1) throw std::invalid_argument("distance_to_set needs n_samples >= 1");
  DistanceBound out;
  out.value = std::numeric_limits<double>::infinity();
  if (membership(body, x, tol)) out.value = 0.0;
  if (body.witness) {
    const P single[] = {x};
    out.value = std::min(out.value, distance(x, body.witness(x, single)));
  }
  for (std::size_t k = 0; k < n_samples && out.value > 0.0; ++k)
    out.value = std::min(out.value, distance(x, body.sample(seed + k)));
  if (body.distance_lower_bound) out.lower = body.distance_lower_bound(x);
  if (out.value - out.lower <= tol) out.bound_type = BoundType::exact;
  return out;
}

// ---------------------------------------------------------------------------
// Catalog.

namespace detail {

inline std::string format_value(double v, double tol) { return fmt::format("{:.6g}", std::abs(v) <= tol ? 0.0 : v); }

inline double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Mixture of flat-Dirichlet densities and uniform densities on random dyadic
// intervals; the latter give disjointly supported pairs.
inline GridFunction sample_density(std::mt19937_64& rng, int level) {
  const std::size_t cells = std::size_t{1} << level;
  auto dirichlet = [&] {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(cells);
    double sum = 0.0;
    for (double& v : w) sum += (v = e(rng));
    const double scale = static_cast<double>(cells) / sum;
    for (double& v : w) v *= scale;
    return GridFunction(level, std::move(w));
  };
  auto block = [&] {
    const int depth = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(level) + 1));
    const std::size_t j = uniform_index(rng, std::size_t{1} << depth);
    const std::size_t width = cells >> depth;
    std::vector<double> v(cells, 0.0);
    std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(j * width), width, std::ldexp(1.0, depth));
    return GridFunction(level, std::move(v));
  };
  switch (uniform_index(rng, 3)) {
    case 0: return dirichlet();
    case 1: return block();
    default: {
      const double w = uniform01(rng);
      return w * dirichlet() + (1.0 - w) * block();
    }
  }
}

inline double positive_mass(const GridFunction& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += std::max(v, 0.0);
  return sum * f.cell_width();
}

}  // namespace detail

/// co(C U {a}) where C is the density simplex and a in [0, 1] the constant
/// function. a = 1 gives C itself.
inline ConvexBody<GridFunction> cone_hull(double a, int level) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument(fmt::format("cone_hull needs a in [0, 1], got {}", a));
  if (level < 0 || level > max_grid_level) throw std::invalid_argument("cone_hull: bad grid level");
  ConvexBody<GridFunction> body;
  body.name = a == 1.0 ? "density_simplex" : "cone_hull";
  body.spec = a == 1.0 ? nlohmann::json{{"set", "density_simplex"}} : nlohmann::json{{"set", "cone_hull"}, {"a", a}};

  body.violation = [a](const GridFunction& x, double tol) -> std::optional<std::string> {
    if (const double neg = negative_mass(x); neg > tol) return fmt::format("negative part of mass {}", neg);
    const double mass = integral(x);
    if (a == 1.0) {
      if (std::abs(mass - 1.0) > tol)
        return fmt::format("∫ = {} ≠ 1", detail::format_value(mass, tol));
      return std::nullopt;
    }
    // every member is lambda f + (1 - lambda) a with f a density, so the
    // integral pins lambda
    const double lambda = (mass - a) / (1.0 - a);
    if (lambda < -tol) return fmt::format("∫ = {} < a = {}", detail::format_value(mass, tol), a);
    if (lambda > 1.0 + tol) return fmt::format("∫ = {} > 1", detail::format_value(mass, tol));
    const double floor = (1.0 - std::clamp(lambda, 0.0, 1.0)) * a;
    double shortfall = 0.0;
    for (double v : x.values()) shortfall += std::max(floor - v, 0.0);
    if (shortfall * x.cell_width() > tol)
      return fmt::format("mass {} missing below the hull floor {}", shortfall * x.cell_width(), floor);
    return std::nullopt;
  };

  body.sample = [a, level](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GridFunction f = detail::sample_density(rng, level);
    if (a == 1.0) return f;
    const double u = detail::uniform01(rng);
    const double lambda = u < 0.25 ? 1.0 : (u < 0.375 ? 0.0 : detail::uniform01(rng));
    return lambda * f + GridFunction::constant((1.0 - lambda) * a, level);
  };

  body.diameter = 2.0;

  body.witness = [a](const GridFunction& x, std::span<const GridFunction> seq) {
    // h = (1 - lambda) a + lambda (f + (1 - ||f||) a) with x = lambda f + (1 - lambda) a
    double lambda = 1.0;
    if (a < 1.0) {
      std::vector<double> lambdas;
      for (const auto& g : seq) lambdas.push_back((integral(g) - a) / (1.0 - a));
      const auto t = tail(lambdas, 0.5);
      double mean = 0.0;
      for (double v : t) mean += v;
      lambda = std::clamp(mean / static_cast<double>(t.size()), 0.0, 1.0);
    }
    const int level = x.level();
    if (lambda <= 1e-12) return GridFunction::constant(a, level);
    std::vector<double> f(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = std::max((x[i] - (1.0 - lambda) * a) / lambda, 0.0);
    GridFunction fg(level, std::move(f));
    double nf = l1_norm(fg);
    if (nf > 1.0) {
      fg = fg / nf;
      nf = 1.0;
    }
    return lambda * fg + GridFunction::constant((1.0 - lambda) * a + lambda * (1.0 - nf) * a, level);
  };

  // members are nonnegative with integral in [a, 1]
  body.distance_lower_bound = [a](const GridFunction& x) {
    const double pos = detail::positive_mass(x);
    return negative_mass(x) + std::max({0.0, pos - 1.0, a - pos});
  };
  body.distance_bound_exact = a == 1.0;
  body.t_cited = 1.0 + a;
  return body;
}

/// C = { f >= 0, integral 1 }.
inline ConvexBody<GridFunction> density_simplex(int level) { return cone_hull(1.0, level); }

/// Closed unit ball of L1; closed in measure, so t = 1.
inline ConvexBody<GridFunction> unit_ball(int level) {
  if (level < 0 || level > max_grid_level) throw std::invalid_argument("unit_ball: bad grid level");
  ConvexBody<GridFunction> body;
  body.name = "ball";
  body.spec = {{"set", "ball"}};
  body.violation = [](const GridFunction& x, double tol) -> std::optional<std::string> {
    const double n = l1_norm(x);
    if (n > 1.0 + tol) return fmt::format("‖x‖ = {} > 1", n);
    return std::nullopt;
  };
  body.sample = [level](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t cells = std::size_t{1} << level;
    std::vector<double> v(cells, 0.0);
    if (detail::uniform_index(rng, 2) == 0) {
      std::normal_distribution<double> g(0.0, 1.0);
      for (double& x : v) x = g(rng);
    } else {
      const int depth = static_cast<int>(detail::uniform_index(rng, static_cast<std::size_t>(level) + 1));
      const std::size_t width = cells >> depth;
      const std::size_t j = detail::uniform_index(rng, std::size_t{1} << depth);
      const double sign = detail::uniform_index(rng, 2) == 0 ? 1.0 : -1.0;
      std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(j * width), width, sign);
    }
    GridFunction f(level, std::move(v));
    const double n = l1_norm(f);
    const double u = detail::uniform01(rng);
    const double radius = u < 0.25 ? 1.0 : detail::uniform01(rng);
    return n > 0.0 ? (radius / n) * f : f;
  };
  body.diameter = 2.0;
  body.witness = [](const GridFunction& x, std::span<const GridFunction>) {
    const double n = l1_norm(x);
    return n <= 1.0 ? x : x / n;
  };
  body.distance_lower_bound = [](const GridFunction& x) { return std::max(0.0, l1_norm(x) - 1.0); };
  body.distance_bound_exact = true;
  body.t_cited = 1.0;
  return body;
}

/// C_t = { s_1 (t-1) g_1 + sum_{n>=2} s_n g_n : s >= 0, sum s = 1 }, truncated
/// to M coordinates. Samples keep their mass in the first half of the slots
/// so that shifted orbits have room before the truncation.
inline ConvexBody<CoordPoint> ct_simplex(double t, std::size_t m) {
  if (!(t > 1.0 && t < 2.0)) throw std::invalid_argument(fmt::format("ct needs t in (1, 2), got {}", t));
  if (m < 2) throw std::invalid_argument("ct needs M >= 2");
  ConvexBody<CoordPoint> body;
  body.name = "ct";
  body.spec = {{"set", "ct"}, {"t", t}, {"M", m}};
  body.violation = [t, m](const CoordPoint& x, double tol) -> std::optional<std::string> {
    if (x.t() != t) return fmt::format("point has t = {}, body has t = {}", x.t(), t);
    if (x.size() != m) return fmt::format("point has {} coordinates, body has M = {}", x.size(), m);
    for (std::size_t i = 0; i < m; ++i)
      if (x[i] < -tol) return fmt::format("negative coordinate {} in slot {}", x[i], i + 1);
    const double sum = coefficient_sum(x);
    if (std::abs(sum - 1.0) > tol) return fmt::format("Σ s_n = {} ≠ 1", detail::format_value(sum, tol));
    return std::nullopt;
  };
  body.sample = [t, m](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t k = std::max<std::size_t>(1, m / 2);
    std::vector<double> s(m, 0.0);
    std::exponential_distribution<double> e(1.0);
    switch (detail::uniform_index(rng, 3)) {
      case 0: s[detail::uniform_index(rng, k)] = 1.0; break;
      case 1:
        for (std::size_t j = 0, n = 1 + detail::uniform_index(rng, std::min<std::size_t>(k, 4)); j < n; ++j)
          s[detail::uniform_index(rng, k)] += e(rng);
        break;
      default:
        for (std::size_t j = 0; j < k; ++j) s[j] = e(rng);
    }
    double sum = 0.0;
    for (double v : s) sum += v;
    for (double& v : s) v /= sum;
    return CoordPoint(t, std::move(s));
  };
  body.diameter = 2.0;
  body.witness = [](const CoordPoint& x, std::span<const CoordPoint>) {
    // g = x + (1 - delta) (t-1) g_1: the missing mass goes to the shrunk vertex
    std::vector<double> s(x.coeffs().begin(), x.coeffs().end());
    for (double& v : s) v = std::max(v, 0.0);
    double delta = 0.0;
    for (double v : s) delta += v;
    if (delta > 1.0) {
      for (double& v : s) v /= delta;
      delta = 1.0;
    }
    s[0] += 1.0 - delta;
    return CoordPoint(x.t(), std::move(s));
  };
  // exact: start from the positive part, then add or remove mass at the
  // cheapest slot (slot 1 costs t-1 per unit, the rest cost 1)
  body.distance_lower_bound = [](const CoordPoint& x) {
    double neg = 0.0;
    double pos = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      neg += x.weight(i) * std::max(-x[i], 0.0);
      pos += std::max(x[i], 0.0);
    }
    const double w1 = x.weight(0);
    if (pos < 1.0) return neg + w1 * (1.0 - pos);
    const double first = std::max(x[0], 0.0);
    const double excess = pos - 1.0;
    return neg + w1 * std::min(excess, first) + std::max(0.0, excess - first);
  };
  body.distance_bound_exact = true;
  body.t_cited = t;
  return body;
}

}  // namespace fptlab
