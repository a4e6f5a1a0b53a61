#pragma once

// Estimators and closed forms for the geometric coefficients: t(C), the Opial
// modulus of L1, the equality defect of disjointifying sequences, the main
// fixed-point condition and the Orlicz coefficient a(delta).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/csv.hpp"
#include "fptlab/error.hpp"
#include "fptlab/extraction.hpp"
#include "fptlab/point.hpp"
#include "fptlab/sets.hpp"

namespace fptlab {

struct CoefficientReport {
  std::string quantity;
  double estimate = 0.0;
  double estimate_low = 0.0;
  double estimate_high = 0.0;
  BoundType bound_type = BoundType::upper;
  std::string witness;
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> flags;
};

inline void to_json(nlohmann::json& j, const CoefficientReport& r) {
  j = nlohmann::json{{"quantity", r.quantity},           {"estimate", r.estimate},
                     {"estimate_low", r.estimate_low},   {"estimate_high", r.estimate_high},
                     {"bound_type", to_string(r.bound_type)}, {"witness", r.witness},
                     {"params", r.params},               {"flags", r.flags}};
}

inline constexpr std::string_view coefficient_csv_header =
    "quantity,estimate,estimate_low,estimate_high,bound_type,witness";

inline std::string csv_row(const CoefficientReport& r) {
  return fmt::format("{},{},{},{},{},{}", csv_field(r.quantity), r.estimate, r.estimate_low, r.estimate_high,
                     to_string(r.bound_type), csv_field(r.witness));
}

/// A named finite sequence in a body, converging in measure.
template <Point P>
struct SequenceFamily {
  std::string name;
  std::vector<P> terms;
};

/// Peaks 2^k 1_[0, 2^-k) for k = k_lo..k_hi at the given level.
inline SequenceFamily<GridFunction> peak_family(int k_lo, int k_hi, int level) {
  if (k_lo < 0 || k_hi < k_lo || k_hi > level)
    throw std::invalid_argument(fmt::format("peak family k = {}..{} needs 0 <= k_lo <= k_hi <= level {}", k_lo,
                                            k_hi, level));
  SequenceFamily<GridFunction> fam{fmt::format("peaks(2^k, k={}..{})", k_lo, k_hi), {}};
  for (int k = k_lo; k <= k_hi; ++k) fam.terms.push_back(peak_sequence(std::uint64_t{1} << k, level));
  return fam;
}

/// Basis vertices e_n, n = n_lo..M: disjoint unit mass moving off to infinity.
inline SequenceFamily<CoordPoint> vertex_family(double t, std::size_t m, std::size_t n_lo = 2) {
  if (n_lo < 1 || n_lo > m) throw std::invalid_argument("vertex family needs 1 <= n_lo <= M");
  SequenceFamily<CoordPoint> fam{fmt::format("e_n, n={}..{}", n_lo, m), {}};
  for (std::size_t n = n_lo; n <= m; ++n) fam.terms.push_back(CoordPoint::vertex(t, m, n));
  return fam;
}

struct TBoundsOptions {
  double window_fraction = 0.5;
  double tol = default_tolerance;
  double clamp = 2.0;
  RecenterOptions recenter{};
};

/// Per-family part of a t(C) bracket.
struct TFamilyBound {
  std::string family;
  double denominator = 0.0;  // limsup ||x - x_n||
  double lower = 0.0;
  double upper = 0.0;
  double measured_ratio = 0.0;  // limsup ||h - x_n|| / limsup ||x - x_n|| on the window
  double limit_quality = 0.0;   // Ky Fan distance of trailing terms to the detected limit
  BoundType upper_type = BoundType::exact;
};

/// Bracket on t(C) from witness families. With x the limit in measure of a
/// family, the equality limsup ||x_n - x + z|| = limsup ||x_n - x|| + ||z||
/// turns every candidate c into the ratio 1 + ||c - x|| / limsup ||x - x_n||:
/// the body's certified distance lower bound gives the lower end, the
/// recentering witness the upper end.
template <Point P>
CoefficientReport t_bounds(const ConvexBody<P>& body, std::span<const SequenceFamily<P>> families,
                           const TBoundsOptions& opts = {}, std::vector<TFamilyBound>* details = nullptr) {
  CoefficientReport rep;
  rep.quantity = fmt::format("t({})", body.name);
  rep.params = {{"body", body.spec}, {"window_fraction", opts.window_fraction}};
  double low = -std::numeric_limits<double>::infinity();
  double high = -std::numeric_limits<double>::infinity();
  bool sampled = false;
  std::vector<std::string> used;
  for (const auto& fam : families) {
    if (fam.terms.empty()) continue;
    for (const auto& x : fam.terms)
      if (auto why = membership_violation(body, x, opts.tol))
        throw std::invalid_argument(fmt::format("family {} leaves {}: {}", fam.name, body.name, *why));
    const std::span<const P> seq(fam.terms);
    const auto [limit, quality] = detect_limit(seq, opts.window_fraction);
    const double denom = limsup_distance(limit, seq, opts.window_fraction);
    if (denom < opts.tol) continue;

    TFamilyBound fb;
    fb.family = fam.name;
    fb.denominator = denom;
    fb.limit_quality = quality;
    const double d_low = body.distance_lower_bound ? body.distance_lower_bound(limit) : 0.0;
    fb.lower = 1.0 + d_low / denom;
    const auto h = recenter(body, limit, seq, opts.recenter);
    fb.upper_type = h.bound_type;
    fb.upper = 1.0 + distance(h.point, limit) / denom;
    fb.measured_ratio = limsup_distance(h.point, seq, opts.window_fraction) / denom;
    if (fb.upper > opts.clamp + opts.tol)
      rep.flags.push_back(fmt::format("{}: witness ratio {} exceeds {} (discretization artifact), clamped",
                                      fam.name, fb.upper, opts.clamp));
    fb.upper = std::min(fb.upper, opts.clamp);
    sampled = sampled || h.bound_type != BoundType::exact;
    low = std::max(low, fb.lower);
    high = std::max(high, fb.upper);
    used.push_back(fam.name);
    if (details) details->push_back(fb);
  }
  if (used.empty()) throw estimation_error(fmt::format("t({}): no usable sequence family", body.name));
  rep.estimate_low = low;
  rep.estimate_high = std::max(high, low);
  rep.estimate = rep.estimate_high;
  rep.witness = fmt::format("{}", fmt::join(used, "; "));
  const bool collapsed = rep.estimate_high - rep.estimate_low <= opts.tol;
  rep.bound_type = (!sampled && collapsed && body.t_cited && std::abs(*body.t_cited - rep.estimate_high) <= opts.tol)
                       ? BoundType::exact
                       : BoundType::upper;
  return rep;
}

template <Point P>
CoefficientReport t_bounds(const ConvexBody<P>& body, const SequenceFamily<P>& family,
                           const TBoundsOptions& opts = {}) {
  return t_bounds(body, std::span<const SequenceFamily<P>>(&family, 1), opts);
}

struct StarOptions {
  double window_fraction = 0.5;
  double null_tol = 0.0625;  // largest trailing Ky Fan distance to 0 accepted as "null"
};

/// |limsup ||x_n + z|| - limsup ||x_n|| - ||z|||, for a sequence that tends to
/// 0 in measure.
template <Point P>
double star_equality_defect(std::span<const P> seq, const P& z, const StarOptions& opts = {}) {
  if (seq.empty()) throw std::invalid_argument("star_equality_defect of an empty sequence");
  const P zero = 0.0 * seq.front();
  std::vector<double> kf;
  for (const auto& x : seq) kf.push_back(ky_fan_distance(x, zero));
  const double null_level = limsup_tail(kf, opts.window_fraction);
  if (null_level > opts.null_tol)
    throw std::invalid_argument(fmt::format(
        "sequence is not null in measure: trailing Ky Fan distance to 0 reaches {} > {}", null_level, opts.null_tol));
  std::vector<double> shifted;
  std::vector<double> plain;
  for (const auto& x : seq) {
    shifted.push_back(norm(x + z));
    plain.push_back(norm(x));
  }
  return std::abs(limsup_tail(shifted, opts.window_fraction) - limsup_tail(plain, opts.window_fraction) - norm(z));
}

/// 1 + r(1) for the named space. Only L1, where r(c) = c.
inline double opial_one_plus_r(std::string_view space_tag) {
  if (space_tag == "L1") return 2.0;
  throw std::invalid_argument(fmt::format("no Opial modulus on record for space '{}'", space_tag));
}

struct OpialCheck {
  double c = 0.0;
  double value = 0.0;     // liminf ||x_n - x|| over the window
  double expected = 0.0;  // 1 + c
  double relative_error = 0.0;
};

/// liminf ||x_n - x|| over a null sequence with ||x_n|| = 1 and ||x|| = c;
/// should equal 1 + r(c) = 1 + c.
template <Point P>
OpialCheck opial_cross_check(std::span<const P> seq, const P& x, double window_fraction = 0.5) {
  if (seq.empty()) throw std::invalid_argument("opial_cross_check of an empty sequence");
  std::vector<double> d;
  for (const auto& xn : seq) d.push_back(distance(xn, x));
  OpialCheck out;
  out.c = norm(x);
  out.value = liminf_tail(d, window_fraction);
  out.expected = 1.0 + out.c;
  out.relative_error = std::abs(out.value - out.expected) / out.expected;
  return out;
}

struct ConditionVerdict {
  bool holds = false;
  double threshold = 0.0;  // (1 + r) / t
  double margin = 0.0;     // threshold - S
  bool in_guard_band = false;
};

/// S < (1 + r) / t, decided in floating point; the guard band flags verdicts
/// within tol of the threshold.
inline ConditionVerdict theorem_condition(double s, double t, double one_plus_r, double tol = default_tolerance) {
  if (!(s >= 0.0)) throw std::invalid_argument(fmt::format("S = {} must be >= 0", s));
  if (!(t >= 1.0 && t <= 2.0)) throw std::invalid_argument(fmt::format("t = {} outside [1, 2]", t));
  if (!(one_plus_r >= 1.0)) throw std::invalid_argument(fmt::format("1 + r = {} must be >= 1", one_plus_r));
  ConditionVerdict v;
  v.threshold = one_plus_r / t;
  v.holds = s < v.threshold;
  v.margin = v.threshold - s;
  v.in_guard_band = std::abs(v.margin) <= tol;
  return v;
}

/// n points spaced logarithmically over [lo, hi].
inline std::vector<double> log_probe_grid(double lo = 1e-6, double hi = 1e6, std::size_t n = 1000) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw std::invalid_argument("log_probe_grid needs 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.back() = hi;
  return out;
}

/// min over the probe grid of phi_inverse(t) / phi_inverse(delta t): an upper
/// bound on a(delta).
inline double orlicz_a(const std::function<double(double)>& phi_inverse, double delta,
                       std::span<const double> grid) {
  if (!(delta > 0.0)) throw std::invalid_argument(fmt::format("delta = {} must be > 0", delta));
  if (grid.empty()) throw std::invalid_argument("orlicz_a needs a nonempty probe grid");
  double best = std::numeric_limits<double>::infinity();
  for (double t : grid) {
    const double num = phi_inverse(t);
    const double den = phi_inverse(delta * t);
    if (!(num > 0.0) || !(den > 0.0))
      throw std::invalid_argument(fmt::format("phi_inverse must be positive on the probe grid (t = {})", t));
    best = std::min(best, num / den);
  }
  return best;
}

inline double orlicz_a(const std::function<double(double)>& phi_inverse, double delta) {
  const auto grid = log_probe_grid();
  return orlicz_a(phi_inverse, delta, grid);
}

}  // namespace fptlab
