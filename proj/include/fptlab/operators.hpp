#pragma once

// Affine self-maps of convex bodies, their orbits, Cesaro means, residuals and
// iterate Lipschitz data.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/error.hpp"
#include "fptlab/point.hpp"

namespace fptlab {

template <Point P>
using Sampler = std::function<P(std::uint64_t seed)>;

/// Descriptor of an affine map. Immutable once built; `apply` is pure.
template <Point P>
struct AffineOperator {
  std::string name;
  nlohmann::json spec;  // catalog address, e.g. {"op": "doubling"}
  std::function<P(const P&)> map;
  /// Empty when the operator acts on the whole ambient space.
  std::function<std::optional<std::string>(const P&, double tol)> domain_violation;
  /// Closed-form |T^n|, when known.
  std::function<double(int n)> lipschitz_exact;
  /// Number of further applications the finite representation resolves
  /// faithfully from a given start; empty means unlimited.
  std::function<std::optional<std::size_t>(const P&)> horizon;
};

template <Point P>
P apply(const AffineOperator<P>& op, const P& x, double tol = default_tolerance) {
  if (op.domain_violation)
    if (auto why = op.domain_violation(x, tol)) throw domain_error(op.name + ": " + *why);
  return op.map(x);
}

template <Point P>
std::optional<std::size_t> horizon(const AffineOperator<P>& op, const P& start) {
  return op.horizon ? op.horizon(start) : std::nullopt;
}

template <Point P>
P iterate(const AffineOperator<P>& op, P x, std::size_t n, double tol = default_tolerance) {
  for (std::size_t k = 0; k < n; ++k) x = apply(op, x, tol);
  return x;
}

/// T x0, T^2 x0, ..., T^n x0.
template <Point P>
std::vector<P> orbit(const AffineOperator<P>& op, const P& x0, std::size_t n, double tol = default_tolerance) {
  std::vector<P> out;
  out.reserve(n);
  P y = x0;
  for (std::size_t k = 1; k <= n; ++k) {
    y = apply(op, y, tol);
    out.push_back(y);
  }
  return out;
}

/// z_s = (T x0 + ... + T^s x0) / s for s = 1..n_max, via the running update
/// z_s = z_{s-1} + (T^s x0 - z_{s-1}) / s. Exactly n_max applications.
template <Point P>
std::vector<P> cesaro_means(const AffineOperator<P>& op, const P& x0, std::size_t n_max,
                            double tol = default_tolerance) {
  if (n_max < 1) throw std::invalid_argument("cesaro_means needs n_max >= 1");
  std::vector<P> means;
  means.reserve(n_max);
  P y = x0;
  for (std::size_t s = 1; s <= n_max; ++s) {
    try {
      y = apply(op, y, tol);
    } catch (const domain_error& e) {
      throw domain_error(fmt::format("orbit iterate {} left the domain: {}", s - 1, e.what()));
    }
    if (s == 1)
      means.push_back(y);
    else
      means.push_back(means.back() + (1.0 / static_cast<double>(s)) * (y - means.back()));
  }
  return means;
}

/// ||x - T x||
template <Point P>
double afps_residual(const AffineOperator<P>& op, const P& x, double tol = default_tolerance) {
  return norm(x - apply(op, x, tol));
}

/// ||T(l x + (1-l) y) - l T x - (1-l) T y||
template <Point P>
double affinity_defect(const AffineOperator<P>& op, const P& x, const P& y, double lambda,
                       double tol = default_tolerance) {
  const P lhs = apply(op, convex_combination(lambda, x, y), tol);
  const P rhs = convex_combination(lambda, apply(op, x, tol), apply(op, y, tol));
  return norm(lhs - rhs);
}

/// Largest affinity defect over sampled pairs and lambda in {0, 1/4, 1/2, 3/4, 1}.
template <Point P>
double max_affinity_defect(const AffineOperator<P>& op, const Sampler<P>& sampler, std::size_t pairs,
                           std::uint64_t seed, double tol = default_tolerance) {
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const P x = sampler(seed + 2 * i);
    const P y = sampler(seed + 2 * i + 1);
    for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0})
      worst = std::max(worst, affinity_defect(op, x, y, lambda, tol));
  }
  return worst;
}

/// Largest ratio ||T^n x - T^n y|| / ||x - y|| over the given pairs: a lower
/// bound on |T^n|. Pairs closer than tol are skipped.
template <Point P>
double lipschitz_estimate(const AffineOperator<P>& op, int n, std::span<const std::pair<P, P>> pairs,
                          double tol = default_tolerance) {
  if (n < 1) throw std::invalid_argument("lipschitz_estimate needs n >= 1");
  double best = 0.0;
  std::size_t used = 0;
  for (const auto& [x, y] : pairs) {
    const double d = distance(x, y);
    if (d <= tol) continue;
    ++used;
    const auto un = static_cast<std::size_t>(n);
    best = std::max(best, distance(iterate(op, x, un, tol), iterate(op, y, un, tol)) / d);
  }
  if (used == 0) throw estimation_error(fmt::format("{}: every sampled pair was degenerate", op.name));
  return best;
}

template <Point P>
std::vector<std::pair<P, P>> sample_pairs(const Sampler<P>& sampler, std::size_t pairs, std::uint64_t seed) {
  if (pairs < 1) throw std::invalid_argument("need at least one sample pair");
  std::vector<std::pair<P, P>> out;
  out.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) out.emplace_back(sampler(seed + 2 * i), sampler(seed + 2 * i + 1));
  return out;
}

template <Point P>
double lipschitz_estimate(const AffineOperator<P>& op, int n, const Sampler<P>& sampler, std::size_t pairs,
                          std::uint64_t seed, double tol = default_tolerance) {
  const auto sampled = sample_pairs(sampler, pairs, seed);
  return lipschitz_estimate(op, n, std::span<const std::pair<P, P>>(sampled), tol);
}

/// Per-iterate constants L_1..L_n and the running averages whose minimum is the
/// finite stand-in for liminf (L_1 + ... + L_n) / n.
struct IterateLipschitzProfile {
  std::vector<double> constants;
  std::vector<double> running_means;
  bool exact = false;  // every constant came from a closed form
  double s_value = 0.0;
};

template <Point P>
IterateLipschitzProfile iterate_lipschitz_profile(const AffineOperator<P>& op, int n_max,
                                                  std::span<const std::pair<P, P>> pairs, bool use_exact = true,
                                                  double tol = default_tolerance) {
  if (n_max < 1) throw std::invalid_argument("S(T) needs n_max >= 1");
  IterateLipschitzProfile out;
  out.exact = use_exact && static_cast<bool>(op.lipschitz_exact);
  double mean = 0.0;
  out.s_value = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= n_max; ++n) {
    const double lk = out.exact ? op.lipschitz_exact(n) : lipschitz_estimate(op, n, pairs, tol);
    out.constants.push_back(lk);
    // incremental form keeps a constant sequence exactly constant
    mean += (lk - mean) / static_cast<double>(n);
    out.running_means.push_back(mean);
    out.s_value = std::min(out.s_value, mean);
  }
  return out;
}

/// min over n <= n_max of (L_1 + ... + L_n) / n, with L_k the closed form when
/// the operator carries one and a sampled lower bound otherwise.
template <Point P>
double s_of_t(const AffineOperator<P>& op, int n_max, const Sampler<P>& sampler, std::size_t pairs,
              std::uint64_t seed, double tol = default_tolerance) {
  if (op.lipschitz_exact) return iterate_lipschitz_profile<P>(op, n_max, {}, true, tol).s_value;
  const auto sampled = sample_pairs(sampler, pairs, seed);
  return iterate_lipschitz_profile(op, n_max, std::span<const std::pair<P, P>>(sampled), false, tol).s_value;
}

// ---------------------------------------------------------------------------
// Catalog.

template <Point P>
AffineOperator<P> identity_operator() {
  AffineOperator<P> op;
  op.name = "identity";
  op.spec = {{"op", "identity"}};
  op.map = [](const P& x) { return x; };
  op.lipschitz_exact = [](int) { return 1.0; };
  return op;
}

namespace detail {

inline std::optional<std::size_t> last_nonzero(std::span<const double> v) {
  for (std::size_t i = v.size(); i-- > 0;)
    if (v[i] != 0.0) return i;
  return std::nullopt;
}

inline GridFunction doubling_map(const GridFunction& f) {
  if (f.level() == 0) return f;
  const std::size_t half = f.size() / 2;
  std::vector<double> v(f.size(), 0.0);
  for (std::size_t i = 0; i < half; ++i) v[i] = f[2 * i] + f[2 * i + 1];
  return GridFunction(f.level(), std::move(v));
}

// Applications before the support of T^k f shrinks into the first cell, after
// which the grid no longer tells the orbit apart from a fixed point.
inline std::optional<std::size_t> doubling_horizon(const GridFunction& f) {
  const auto last = last_nonzero(f.values());
  if (!last) return std::nullopt;
  const auto width = static_cast<std::size_t>(std::bit_width(*last));
  return width == 0 ? 0 : width - 1;
}

inline std::optional<std::string> c0_violation(const GridFunction& f, double tol) {
  // measured in L1: dilations blow rounding noise up pointwise but not in mass
  if (const double neg = negative_mass(f); neg > tol) return fmt::format("negative part of mass {}", neg);
  const double mass = integral(f);
  if (mass > 1.0 + tol) return fmt::format("integral {} exceeds 1", mass);
  return std::nullopt;
}

// ||f|| = integral of f on C_0; the integral form is affine on the whole space
// and keeps rounding noise from compounding along G-orbits
inline GridFunction retraction_map(const GridFunction& f) {
  return f + GridFunction::constant(1.0 - integral(f), 0);
}

}  // namespace detail

/// (Tf)_i = f_{2i} + f_{2i+1} on the left half of the grid, 0 on the right: the
/// conditional expectation of f(t) -> 2 f(2t) onto the same grid.
inline AffineOperator<GridFunction> doubling_shift() {
  AffineOperator<GridFunction> op;
  op.name = "doubling";
  op.spec = {{"op", "doubling"}};
  op.map = detail::doubling_map;
  // the exact dilation is an isometry of L1
  op.lipschitz_exact = [](int) { return 1.0; };
  op.horizon = detail::doubling_horizon;
  return op;
}

/// R(f) = f + (1 - ||f||) 1, an affine retraction of C_0 onto the density simplex.
inline AffineOperator<GridFunction> normalizing_retraction() {
  AffineOperator<GridFunction> op;
  op.name = "retraction";
  op.spec = {{"op", "retraction"}};
  op.map = detail::retraction_map;
  op.domain_violation = detail::c0_violation;
  // R is idempotent and |R| = 2 (f = 0 against small peaks at the right end)
  op.lipschitz_exact = [](int) { return 2.0; };
  return op;
}

/// G = T R on C_0 with T the doubling shift. (TR)^n = T^n R, so |G^n| = |R| = 2.
inline AffineOperator<GridFunction> composed_g() {
  AffineOperator<GridFunction> op;
  op.name = "retraction_compose";
  op.spec = {{"op", "retraction_compose"}};
  op.map = [](const GridFunction& f) { return detail::doubling_map(detail::retraction_map(f)); };
  op.domain_violation = detail::c0_violation;
  op.lipschitz_exact = [](int) { return 2.0; };
  op.horizon = [](const GridFunction& f) { return detail::doubling_horizon(detail::retraction_map(f)); };
  return op;
}

/// Circular shift of the grid cells by one: a measure-preserving isometry whose
/// fixed points are the constants.
inline AffineOperator<GridFunction> cyclic_shift() {
  AffineOperator<GridFunction> op;
  op.name = "cyclic";
  op.spec = {{"op", "cyclic"}};
  op.map = [](const GridFunction& f) {
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[(i + 1) % f.size()] = f[i];
    return GridFunction(f.level(), std::move(v));
  };
  op.lipschitz_exact = [](int) { return 1.0; };
  return op;
}

/// (s_1, s_2, ...) -> (0, s_1, s_2, ...) on C_t. Fixed-point free with
/// |T^n| = 2/t for every n. Refuses to drop mass off the truncation.
inline AffineOperator<CoordPoint> ct_shift(double t) {
  if (!(t > 1.0 && t < 2.0)) throw std::invalid_argument(fmt::format("ct_shift needs t in (1, 2), got {}", t));
  AffineOperator<CoordPoint> op;
  op.name = "ct_shift";
  op.spec = {{"op", "ct_shift"}, {"t", t}};
  op.map = [](const CoordPoint& x) {
    const auto c = x.coeffs();
    if (c.back() != 0.0)
      throw domain_error(fmt::format("ct_shift: mass {} in slot {} would fall off the truncation", c.back(),
                                     c.size()));
    std::vector<double> v(c.size(), 0.0);
    std::copy(c.begin(), c.end() - 1, v.begin() + 1);
    return CoordPoint(x.t(), std::move(v));
  };
  op.domain_violation = [t](const CoordPoint& x, double tol) -> std::optional<std::string> {
    if (x.t() != t) return fmt::format("point has t = {}, operator has t = {}", x.t(), t);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < -tol) return fmt::format("negative coordinate {} in slot {}", x[i], i + 1);
    const double sum = coefficient_sum(x);
    if (std::abs(sum - 1.0) > tol) return fmt::format("coordinates sum to {} != 1", sum);
    return std::nullopt;
  };
  op.lipschitz_exact = [t](int) { return 2.0 / t; };
  op.horizon = [](const CoordPoint& x) -> std::optional<std::size_t> {
    const auto last = detail::last_nonzero(x.coeffs());
    return last ? x.size() - 1 - *last : x.size();
  };
  return op;
}

}  // namespace fptlab
