#pragma once

// The constructive fixed-point engine: Cesaro a.f.p.s. records, the r(y)
// functional, one contraction step w(x0), the outer iteration and a plain
// long-horizon Cesaro cross-check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/coefficients.hpp"
#include "fptlab/error.hpp"
#include "fptlab/extraction.hpp"
#include "fptlab/operators.hpp"
#include "fptlab/point.hpp"
#include "fptlab/sets.hpp"

namespace fptlab {

enum class SolveStatus { fixed_point, escaped_in_measure, budget_exhausted };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::fixed_point: return "fixed_point";
    case SolveStatus::escaped_in_measure: return "escaped_in_measure";
    case SolveStatus::budget_exhausted: return "budget_exhausted";
  }
  return "?";
}

enum class SolveMode { proof, practical };

struct SolveOptions {
  double tol = 1e-8;
  std::size_t max_outer = 20;
  std::size_t max_applications = 1'000'000;
  std::size_t record_length = 4096;  // chain length when the operator has no horizon
  std::size_t pool_size = 8;
  std::size_t stable_limits = 3;
  double window_fraction = 0.5;
  double decay_slack = 1e-6;
  double one_plus_r = 2.0;
  std::optional<double> s_value;  // S(T); closed form or sampled when empty
  std::optional<double> t_value;  // t(C); the body's cited value or 2 when empty
  std::uint64_t seed = 0;
  SolveMode mode = SolveMode::proof;
  ExtractionOptions extraction{};
  std::size_t recenter_candidates = 256;
  std::size_t lipschitz_pairs = 32;
  int lipschitz_iterates = 16;
};

/// Cesaro means z_1..z_s of the orbit of T^m(start), with their residuals and
/// the detected limit in measure (absent when no cluster was found).
template <Point P>
struct AfpsRecord {
  P start;
  std::size_t burn_in = 0;
  std::vector<P> points;
  std::vector<double> residuals;
  std::optional<P> limit;
  double limit_quality = 0.0;
  std::vector<std::size_t> indices;  // extracted subsequence
  std::string extraction_note;
  std::size_t applications = 0;
};

struct ChainPlan {
  std::size_t burn_in = 0;
  std::size_t length = 0;
};

/// Where a record's chain sits in the orbit. With a finite horizon H the chain
/// has min_length terms and ends one step short of H (the residual needs one
/// more application), so the burn-in is as deep as the representation allows;
/// otherwise it starts at x0 and runs record_length terms.
inline ChainPlan plan_chain(std::optional<std::size_t> horizon, std::size_t record_length, std::size_t min_length) {
  if (!horizon) return {0, record_length};
  const std::size_t usable = *horizon == 0 ? 0 : *horizon - 1;
  if (usable < min_length)
    throw estimation_error(fmt::format(
        "start point resolves only {} applications on this grid, a record needs {}", usable, min_length));
  const std::size_t length = std::min(record_length, min_length);
  return {usable - length, length};
}

template <Point P>
AfpsRecord<P> build_record(const AffineOperator<P>& op, const P& start, const SolveOptions& opts) {
  const auto plan = plan_chain(horizon(op, start), opts.record_length, opts.extraction.min_length);
  AfpsRecord<P> rec;
  rec.start = start;
  rec.burn_in = plan.burn_in;
  const P y = iterate(op, start, plan.burn_in, opts.tol);
  rec.points = cesaro_means(op, y, plan.length, opts.tol);
  rec.applications = plan.burn_in + plan.length;
  rec.residuals.reserve(rec.points.size());
  for (const auto& z : rec.points) rec.residuals.push_back(afps_residual(op, z, opts.tol));
  try {
    auto ex = komlos_extract(std::span<const P>(rec.points), opts.extraction);
    rec.limit = std::move(ex.limit);
    rec.limit_quality = ex.quality;
    rec.indices = std::move(ex.indices);
  } catch (const estimation_error& e) {
    rec.extraction_note = e.what();
  }
  return rec;
}

/// limsup_tail ||y - x_n|| for one record.
template <Point P>
double record_distance(const P& y, const AfpsRecord<P>& rec, double window_fraction = 0.5) {
  return limsup_distance(y, std::span<const P>(rec.points), window_fraction);
}

/// min over records of limsup_tail ||y - x_n||: an upper bound on r(y).
template <Point P>
double r_estimate(const P& y, std::span<const AfpsRecord<P>> records, double window_fraction = 0.5) {
  if (records.empty()) throw std::invalid_argument("r_estimate needs at least one record");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : records) best = std::min(best, record_distance(y, rec, window_fraction));
  return best;
}

/// Half of the largest eps with S <= K (1 - eps) / (1 + eps)^2, K = (1 + r)/t.
/// Empty when S >= K.
inline std::optional<double> admissible_eps(double s, double threshold) {
  if (!(s < threshold)) return std::nullopt;
  auto f = [threshold](double e) { return threshold * (1.0 - e) / ((1.0 + e) * (1.0 + e)); };
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > s ? lo : hi) = mid;
  }
  return 0.5 * lo;
}

inline bool eps_admissible(double eps, double s, double threshold) {
  return eps > 0.0 && eps < 1.0 && s < threshold * (1.0 - eps) / ((1.0 + eps) * (1.0 + eps));
}

struct StepReport {
  double r_estimate = 0.0;
  double eps = 0.0;
  double rho = 0.0;
  std::string branch;  // x_bar, z_bar or skip
  double x_condition = std::numeric_limits<double>::infinity();  // limsup ||x - x_n||
  double z_condition = std::numeric_limits<double>::infinity();  // limsup ||z - zbar_p||
  double displacement = 0.0;
  double displacement_bound = 0.0;
  double r_next = 0.0;
  bool decay_verified = false;
  bool displacement_verified = false;
  std::vector<std::string> flags;
};

template <Point P>
struct StepResult {
  P w;
  StepReport report;
  std::optional<AfpsRecord<P>> w_record;
  std::size_t applications = 0;
};

struct ProofContext {
  double s_value = 1.0;
  double t_value = 1.0;
  SolveOptions opts{};
};

/// One step x0 -> w(x0). `own` is the record started at x0; its Cesaro means
/// are the secondary means z_s. Throws hypothesis_violation when eps is not
/// admissible or neither branch condition holds.
template <Point P>
StepResult<P> proof_step(const AffineOperator<P>& op, const ConvexBody<P>& body, const P& x0, double eps,
                         std::span<const AfpsRecord<P>> pool, const AfpsRecord<P>& own, const ProofContext& ctx) {
  const auto& opts = ctx.opts;
  const double threshold = opts.one_plus_r / ctx.t_value;
  if (!eps_admissible(eps, ctx.s_value, threshold))
    throw hypothesis_violation(fmt::format("eps = {} is not admissible: S = {} against (1 + r)/t = {}", eps,
                                           ctx.s_value, threshold));
  StepResult<P> out{x0, {}, std::nullopt, 0};
  auto& rep = out.report;
  rep.eps = eps;

  const AfpsRecord<P>* best = &own;
  double r0 = record_distance(x0, own, opts.window_fraction);
  for (const auto& rec : pool) {
    const double d = record_distance(x0, rec, opts.window_fraction);
    if (d < r0 || (d == r0 && rec.limit && !best->limit)) {
      r0 = d;
      best = &rec;
    }
  }
  rep.r_estimate = r0;
  if (r0 <= opts.tol) {
    rep.branch = "skip";
    rep.decay_verified = rep.displacement_verified = true;
    return out;
  }
  rep.rho = r0 * (1.0 - eps) / (ctx.t_value * (1.0 + eps));

  // x branch: the limit of the record realizing r(x0)
  if (best->limit) rep.x_condition = record_distance(*best->limit, *best, opts.window_fraction);
  // z branch: Cesaro means of the subsequence extracted from the secondary means
  std::vector<P> zbar;
  if (own.limit && !own.indices.empty()) {
    for (std::size_t p = 0; p < own.indices.size(); ++p) {
      const P& h = own.points[own.indices[p]];
      zbar.push_back(p == 0 ? h : zbar.back() + (1.0 / static_cast<double>(p + 1)) * (h - zbar.back()));
    }
    rep.z_condition = limsup_distance(*own.limit, std::span<const P>(zbar), opts.window_fraction);
  }

  const RecenterOptions rc{opts.recenter_candidates, opts.seed, opts.window_fraction};
  if (rep.x_condition <= rep.rho + opts.tol) {
    rep.branch = "x_bar";
    out.w = recenter(body, *best->limit, std::span<const P>(best->points), rc).point;
  } else if (rep.z_condition <= rep.rho + opts.tol) {
    rep.branch = "z_bar";
    out.w = recenter(body, *own.limit, std::span<const P>(zbar), rc).point;
  } else {
    throw hypothesis_violation(fmt::format(
        "theorem hypothesis violated or estimates too loose: limsup ||x - x_n|| = {}, limsup ||z - zbar_p|| = {}, "
        "rho = {}",
        rep.x_condition, rep.z_condition, rep.rho));
  }
  if (auto why = membership_violation(body, out.w, opts.tol)) rep.flags.push_back("recentered point: " + *why);

  rep.displacement = distance(x0, out.w);
  rep.displacement_bound = (2.0 + (1.0 + eps) * ctx.s_value) * r0;
  rep.displacement_verified = rep.displacement <= rep.displacement_bound + opts.tol;
  if (!rep.displacement_verified) rep.flags.push_back("displacement bound not met");

  out.w_record = build_record(op, out.w, opts);
  out.applications = out.w_record->applications;
  rep.r_next = record_distance(out.w, *out.w_record, opts.window_fraction);
  for (const auto& rec : pool) rep.r_next = std::min(rep.r_next, record_distance(out.w, rec, opts.window_fraction));
  rep.decay_verified = rep.r_next <= (1.0 - eps) * r0 + opts.decay_slack;
  if (!rep.decay_verified) rep.flags.push_back("r(w) <= (1 - eps) r(x0) not verified");
  return out;
}

struct TraceRow {
  std::size_t outer_iter = 0;
  std::optional<double> r_estimate;
  std::string branch;
  std::optional<double> displacement;
  double residual = 0.0;
  std::optional<double> ky_fan_to_limit;
  bool membership = false;
};

inline constexpr std::string_view trace_csv_header =
    "outer_iter,r_estimate,branch,displacement,residual,ky_fan_to_limit,membership";

inline std::string csv_row(const TraceRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  return fmt::format("{},{},{},{},{},{},{}", r.outer_iter, opt(r.r_estimate), r.branch, opt(r.displacement),
                     r.residual, opt(r.ky_fan_to_limit), r.membership ? "true" : "false");
}

template <Point P>
struct SolveOutcome {
  SolveStatus status = SolveStatus::budget_exhausted;
  P point;
  double residual = std::numeric_limits<double>::infinity();
  std::optional<P> limit;
  std::vector<TraceRow> trace;
  std::vector<StepReport> steps;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::size_t applications = 0;
  std::optional<double> eps;
};

/// First sample (seed, seed+1, ...) inside the operator's domain whose orbit
/// the representation resolves for at least `min_horizon` applications.
template <Point P>
P pick_start(const AffineOperator<P>& op, const ConvexBody<P>& body, std::uint64_t seed, std::size_t min_horizon,
             std::size_t tries = 64) {
  for (std::size_t k = 0; k < tries; ++k) {
    P x = body.sample(seed + k);
    if (op.domain_violation && op.domain_violation(x, default_tolerance)) continue;
    const auto h = horizon(op, x);
    if (!h || *h >= min_horizon) return x;
  }
  throw estimation_error(fmt::format("no sample of {} in {} tries gives an orbit resolved for {} steps", body.name,
                                     tries, min_horizon));
}

namespace detail {

// The grid cannot tell a point with no resolved applications left from a
// fixed point, so such points are never reported as fixed.
template <Point P>
bool resolved(const AffineOperator<P>& op, const P& x) {
  const auto h = horizon(op, x);
  return !h || *h > 0;
}

template <Point P>
double safe_residual(const AffineOperator<P>& op, const P& x, double tol) {
  try {
    return afps_residual(op, x, tol);
  } catch (const domain_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

template <Point P>
bool limits_stable(const std::deque<P>& limits, std::size_t count, double tol) {
  if (limits.size() < count) return false;
  for (std::size_t i = limits.size() - count; i < limits.size(); ++i)
    for (std::size_t j = i + 1; j < limits.size(); ++j)
      if (ky_fan_distance(limits[i], limits[j]) > tol) return false;
  return true;
}

template <Point P>
std::optional<double> opt_ky_fan(const P& x, const std::optional<P>& limit) {
  if (!limit) return std::nullopt;
  return ky_fan_distance(x, *limit);
}

}  // namespace detail

struct SolveSetup {
  double s_value = 0.0;
  double t_value = 2.0;
  ConditionVerdict verdict;
  std::optional<double> eps;
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// Affinity check, S(T), t(C), the theorem condition and the eps schedule.
template <Point P>
SolveSetup solve_setup(const AffineOperator<P>& op, const ConvexBody<P>& body, const SolveOptions& opts) {
  SolveSetup su;
  const double defect = max_affinity_defect<P>(op, Sampler<P>(body.sample), 8, opts.seed, opts.tol);
  if (defect > 1e-8) throw std::invalid_argument(fmt::format("{} is not affine (defect {})", op.name, defect));
  su.s_value = opts.s_value ? *opts.s_value
                            : s_of_t<P>(op, opts.lipschitz_iterates, Sampler<P>(body.sample), opts.lipschitz_pairs,
                                        opts.seed, opts.tol);
  std::string t_source = "option";
  if (opts.t_value) {
    su.t_value = *opts.t_value;
  } else if (body.t_cited) {
    su.t_value = *body.t_cited;
    t_source = "closed form";
  } else {
    su.t_value = 2.0;
    t_source = "unknown, worst case 2";
  }
  su.verdict = theorem_condition(su.s_value, su.t_value, opts.one_plus_r, opts.tol);
  if (su.verdict.holds && !su.verdict.in_guard_band) su.eps = admissible_eps(su.s_value, su.verdict.threshold);
  su.diagnostics = {{"operator", op.spec},
                    {"body", body.spec},
                    {"S", su.s_value},
                    {"t", su.t_value},
                    {"t_source", t_source},
                    {"one_plus_r", opts.one_plus_r},
                    {"threshold", su.verdict.threshold},
                    {"condition_holds", su.verdict.holds},
                    {"condition_margin", su.verdict.margin},
                    {"condition_in_guard_band", su.verdict.in_guard_band},
                    {"affinity_defect", defect}};
  if (su.eps) su.diagnostics["eps"] = *su.eps;
  return su;
}

namespace detail {

template <Point P>
bool check_escape(SolveOutcome<P>& out, const ConvexBody<P>& body, const std::deque<P>& limits,
                  const SolveOptions& opts) {
  if (!limits_stable(limits, opts.stable_limits, opts.extraction.tol)) return false;
  const auto why = membership_violation(body, limits.back(), opts.tol);
  if (!why) return false;
  out.status = SolveStatus::escaped_in_measure;
  out.limit = limits.back();
  out.diagnostics["membership_violation"] = *why;
  out.diagnostics["limit_norm"] = norm(limits.back());
  return true;
}

}  // namespace detail

/// Outer iteration a_{k+1} = w(a_k) of the proof. A fixed point is declared at
/// an iterate with residual <= tol inside the body; escape when the detected
/// limits of the last `stable_limits` records agree in measure and leave the
/// body. Failed steps restart from a fresh body sample.
template <Point P>
SolveOutcome<P> solve(const AffineOperator<P>& op, const ConvexBody<P>& body, const P& x0,
                      const SolveOptions& opts = {}) {
  if (opts.max_outer < 1) throw std::invalid_argument("solve needs max_outer >= 1");
  const auto su = solve_setup(op, body, opts);
  SolveOutcome<P> out;
  out.diagnostics = su.diagnostics;
  out.diagnostics["mode"] = "proof";
  out.eps = su.eps;
  const ProofContext ctx{su.s_value, su.t_value, opts};

  P a = x0;
  std::optional<AfpsRecord<P>> own;
  std::deque<AfpsRecord<P>> pool;
  std::deque<P> limits;
  nlohmann::json restarts = nlohmann::json::array();
  std::uint64_t restart_seed = opts.seed + 1;

  for (std::size_t k = 1; k <= opts.max_outer; ++k) {
    if (out.applications >= opts.max_applications) break;
    TraceRow row;
    row.outer_iter = k;
    row.residual = detail::safe_residual(op, a, opts.tol);
    row.membership = membership(body, a, opts.tol);
    out.point = a;
    out.residual = row.residual;
    if (row.residual <= opts.tol && row.membership && detail::resolved(op, a)) {
      row.branch = "fixed";
      out.trace.push_back(row);
      out.status = SolveStatus::fixed_point;
      break;
    }
    try {
      if (!own) {
        own = build_record(op, a, opts);
        out.applications += own->applications;
      }
      if (own->limit) {
        limits.push_back(*own->limit);
        row.ky_fan_to_limit = ky_fan_distance(a, *own->limit);
      }
      if (detail::check_escape(out, body, limits, opts)) {
        row.branch = "escaped";
        out.trace.push_back(row);
        break;
      }
      if (!su.eps)
        throw hypothesis_violation(fmt::format("no admissible eps: S = {} is not below (1 + r)/t = {}", su.s_value,
                                               su.verdict.threshold));
      const std::vector<AfpsRecord<P>> pool_v(pool.begin(), pool.end());
      auto step = proof_step(op, body, a, *su.eps, std::span<const AfpsRecord<P>>(pool_v), *own, ctx);
      out.applications += step.applications;
      pool.push_back(std::move(*own));
      while (pool.size() > opts.pool_size) pool.pop_front();
      row.r_estimate = step.report.r_estimate;
      row.branch = step.report.branch;
      row.displacement = step.report.displacement;
      out.trace.push_back(row);
      out.steps.push_back(step.report);
      a = std::move(step.w);
      own = std::move(step.w_record);
    } catch (const error& e) {
      row.branch = "restart";
      out.trace.push_back(row);
      restarts.push_back({{"outer_iter", k}, {"reason", e.what()}});
      if (own) {
        pool.push_back(std::move(*own));
        while (pool.size() > opts.pool_size) pool.pop_front();
      }
      own.reset();
      try {
        a = pick_start(op, body, restart_seed, 2 * opts.extraction.min_length + 1);
        restart_seed += 64;
      } catch (const estimation_error& e2) {
        restarts.push_back({{"outer_iter", k}, {"reason", e2.what()}});
        break;
      }
    }
  }
  out.diagnostics["restarts"] = restarts;
  out.diagnostics["applications"] = out.applications;
  return out;
}

struct PracticalOptions {
  double tol = 1e-8;
  std::size_t n_max = 4096;  // chain length when the operator has no horizon
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
  ExtractionOptions extraction{};
  bool keep_trace = true;
};

/// Plain Cesaro solver: scans the means of each chain for the first one with
/// residual <= tol inside the body. Chains are placed as in build_record;
/// limits of unsuccessful chains feed the same escape test as solve.
template <Point P>
SolveOutcome<P> practical_cesaro_solve(const AffineOperator<P>& op, const ConvexBody<P>& body, const P& x0,
                                       const PracticalOptions& opts = {}) {
  if (opts.n_max < 1) throw std::invalid_argument("practical_cesaro_solve needs n_max >= 1");
  SolveOutcome<P> out;
  out.diagnostics["mode"] = "practical";
  out.point = x0;
  std::deque<P> limits;
  nlohmann::json notes = nlohmann::json::array();
  SolveOptions escape_opts;
  escape_opts.tol = opts.tol;
  escape_opts.extraction = opts.extraction;
  escape_opts.stable_limits = std::min<std::size_t>(3, std::max<std::size_t>(opts.restarts, 1));

  std::uint64_t restart_seed = opts.seed + 1;
  std::size_t global = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(opts.restarts, 1); ++r) {
    P start = x0;
    if (r > 0) {
      try {
        start = pick_start(op, body, restart_seed, 2 * opts.extraction.min_length + 1);
        restart_seed += 64;
      } catch (const estimation_error& e) {
        notes.push_back(e.what());
        break;
      }
    }
    if (r == 0 && afps_residual(op, start, opts.tol) <= opts.tol && membership(body, start, opts.tol) &&
        detail::resolved(op, start)) {
      out.status = SolveStatus::fixed_point;
      out.point = start;
      out.residual = detail::safe_residual(op, start, opts.tol);
      out.trace.push_back({0, std::nullopt, "fixed", std::nullopt, out.residual, std::nullopt, true});
      return out;
    }
    ChainPlan plan;
    try {
      plan = plan_chain(horizon(op, start), opts.n_max, opts.extraction.min_length);
    } catch (const estimation_error& e) {
      notes.push_back(e.what());
      continue;
    }
    P y = iterate(op, start, plan.burn_in, opts.tol);
    out.applications += plan.burn_in;
    std::vector<P> means;
    means.reserve(plan.length);
    for (std::size_t s = 1; s <= plan.length; ++s) {
      y = apply(op, y, opts.tol);
      ++out.applications;
      means.push_back(s == 1 ? y : means.back() + (1.0 / static_cast<double>(s)) * (y - means.back()));
      const P& z = means.back();
      const double res = detail::safe_residual(op, z, opts.tol);
      const bool member = membership(body, z, opts.tol);
      ++global;
      if (opts.keep_trace) out.trace.push_back({global, std::nullopt, "cesaro", std::nullopt, res, std::nullopt, member});
      if (res < out.residual) {
        out.residual = res;
        out.point = z;
      }
      if (res <= opts.tol && member && detail::resolved(op, z)) {
        out.status = SolveStatus::fixed_point;
        out.point = z;
        out.residual = res;
        out.diagnostics["chain"] = r;
        out.diagnostics["s"] = s;
        out.diagnostics["applications"] = out.applications;
        return out;
      }
    }
    try {
      auto ex = komlos_extract(std::span<const P>(means), opts.extraction);
      limits.push_back(ex.limit);
      if (opts.keep_trace)
        for (std::size_t i = 0; i < means.size(); ++i)
          out.trace[out.trace.size() - means.size() + i].ky_fan_to_limit = ky_fan_distance(means[i], ex.limit);
      if (detail::check_escape(out, body, limits, escape_opts)) break;
    } catch (const estimation_error& e) {
      notes.push_back(e.what());
    }
  }
  out.diagnostics["notes"] = notes;
  out.diagnostics["applications"] = out.applications;
  return out;
}

}  // namespace fptlab
