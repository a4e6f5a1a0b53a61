#pragma once

// Batch experiments behind the command line: configuration, the table of
// reproduced constants, the sharpness sweep, single solves and coefficient
// reports. Every command renders its outputs into strings so that callers
// decide where bytes go.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fptlab/catalog.hpp"
#include "fptlab/coefficients.hpp"
#include "fptlab/csv.hpp"
#include "fptlab/solver.hpp"

namespace fptlab {

struct ExperimentConfig {
  std::string command = "reproduce";
  nlohmann::json body;  // null: command default
  nlohmann::json op;
  std::optional<int> level;
  std::size_t M = 64;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  double window_fraction = 0.5;
  std::string out;
  std::string trace;
  std::string mode = "proof";
  std::size_t max_outer = 20;
  std::vector<double> t_grid{1.1, 1.25, 1.5, 1.75, 1.9};
  std::vector<double> a_values{0.0, 0.25, 0.5, 0.75, 1.0};

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void validate(const ExperimentConfig& c) {
  static const std::set<std::string> commands{"reproduce", "solve", "coeff", "sharpness"};
  if (!commands.count(c.command)) throw std::invalid_argument(fmt::format("unknown command '{}'", c.command));
  if (c.mode != "proof" && c.mode != "practical")
    throw std::invalid_argument(fmt::format("mode must be proof or practical, got '{}'", c.mode));
  if (!(c.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (!(c.window_fraction > 0.0 && c.window_fraction <= 1.0))
    throw std::invalid_argument("window_fraction must lie in (0, 1]");
  if (c.M < 2) throw std::invalid_argument("M must be >= 2");
  if (c.level && (*c.level < 0 || *c.level > max_grid_level))
    throw std::invalid_argument(fmt::format("level must lie in [0, {}]", max_grid_level));
  if (c.max_outer < 1) throw std::invalid_argument("max_outer must be >= 1");
  for (double t : c.t_grid)
    if (!(t > 1.0 && t < 2.0)) throw std::invalid_argument(fmt::format("t-grid value {} outside (1, 2)", t));
  for (double a : c.a_values)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument(fmt::format("a value {} outside [0, 1]", a));
  if (!c.body.is_null() && !c.body.is_object()) throw std::invalid_argument("body must be an object");
  if (!c.op.is_null() && !c.op.is_object()) throw std::invalid_argument("op must be an object");
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"command", c.command},
                     {"body", c.body},
                     {"op", c.op},
                     {"level", c.level ? nlohmann::json(*c.level) : nlohmann::json()},
                     {"M", c.M},
                     {"tol", c.tol},
                     {"seed", c.seed},
                     {"window_fraction", c.window_fraction},
                     {"out", c.out},
                     {"trace", c.trace},
                     {"mode", c.mode},
                     {"max_outer", c.max_outer},
                     {"t_grid", c.t_grid},
                     {"a_values", c.a_values}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig d;
  for (const auto& [key, v] : j.items()) {
    if (key == "command") d.command = v.get<std::string>();
    else if (key == "body") d.body = v;
    else if (key == "op") d.op = v;
    else if (key == "level") d.level = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
    else if (key == "M") d.M = v.get<std::size_t>();
    else if (key == "tol") d.tol = v.get<double>();
    else if (key == "seed") d.seed = v.get<std::uint64_t>();
    else if (key == "window_fraction") d.window_fraction = v.get<double>();
    else if (key == "out") d.out = v.get<std::string>();
    else if (key == "trace") d.trace = v.get<std::string>();
    else if (key == "mode") d.mode = v.get<std::string>();
    else if (key == "max_outer") d.max_outer = v.get<std::size_t>();
    else if (key == "t_grid") d.t_grid = v.get<std::vector<double>>();
    else if (key == "a_values") d.a_values = v.get<std::vector<double>>();
    else throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
  }
  validate(d);
  c = std::move(d);
}

inline ExperimentConfig parse_config(std::string_view text) {
  return nlohmann::json::parse(text).get<ExperimentConfig>();
}

/// What a command produced. `main` goes to the out path (stdout when unset),
/// `trace` to the trace path.
struct CommandOutput {
  int exit_code = 0;
  std::string main;
  std::string trace;
  std::string summary;
};

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceRow {
  std::string quantity;
  double paper_value = 0.0;
  double estimate_low = 0.0;
  double estimate_high = 0.0;
  double gap = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

inline constexpr std::string_view reproduce_csv_header =
    "quantity,paper_value,estimate_low,estimate_high,gap,tolerance,pass,note";

inline std::string csv_row(const ReproduceRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{}", csv_field(r.quantity), r.paper_value, r.estimate_low,
                     r.estimate_high, r.gap, r.tolerance, r.pass ? "pass" : "fail", csv_field(r.note));
}

namespace detail {

// Bracket rows: [low, high] must contain the value and be at most `rel`
// wide relative to it.
inline ReproduceRow bracket_row(std::string quantity, double value, double low, double high, double rel) {
  ReproduceRow r{std::move(quantity), value, low, high, 0.0, rel, false, {}};
  r.gap = (high - low) / std::abs(value);
  r.pass = low <= value + 1e-9 && value <= high + 1e-9 && r.gap <= rel;
  return r;
}

// Upper-bound rows: the estimate may not exceed the value by more than `abs`.
inline ReproduceRow bound_row(std::string quantity, double value, double estimate, double abs) {
  ReproduceRow r{std::move(quantity), value, estimate, estimate, std::max(0.0, estimate - value), abs, false, {}};
  r.pass = estimate <= value + abs;
  return r;
}

inline ReproduceRow value_row(std::string quantity, double value, double estimate, double abs) {
  ReproduceRow r{std::move(quantity), value, estimate, estimate, std::abs(estimate - value), abs, false, {}};
  r.pass = r.gap <= abs;
  return r;
}

// Pair realizing |G^n| = 2 up to 2w: 0 against the peak of width w at the
// right end, which the first log2(w 2^level) doubling steps keep apart.
inline std::pair<GridFunction, GridFunction> retraction_witness(int level, int n_max) {
  const double w = std::ldexp(1.0, -(level - n_max));
  return {GridFunction::zero(level), indicator(1.0 - w, 1.0, level) / w};
}

}  // namespace detail

inline std::vector<ReproduceRow> reproduce_rows(const ExperimentConfig& cfg) {
  const int level = cfg.level.value_or(12);
  std::vector<ReproduceRow> rows;
  auto guarded = [&rows](const std::string& quantity, double paper, auto&& make) {
    try {
      rows.push_back(make());
    } catch (const std::exception& e) {
      rows.push_back({quantity, paper, NAN, NAN, NAN, 0.0, false, fmt::format("error: {}", e.what())});
    }
  };
  TBoundsOptions tb;
  tb.window_fraction = cfg.window_fraction;
  tb.recenter.seed = cfg.seed;

  for (double a : cfg.a_values) {
    const auto q = fmt::format("t(C_a) a={}", a);
    guarded(q, 1.0 + a, [&] {
      const auto body = cone_hull(a, level);
      const auto rep = t_bounds(body, peak_family(4, level, level), tb);
      return detail::bracket_row(q, 1.0 + a, rep.estimate_low, rep.estimate_high, 0.02);
    });
  }
  guarded("t(ball)", 1.0, [&] {
    const auto rep = t_bounds(unit_ball(level), peak_family(4, level, level), tb);
    return detail::bracket_row("t(ball)", 1.0, rep.estimate_low, rep.estimate_high, 0.02);
  });
  for (double t : cfg.t_grid) {
    const auto q = fmt::format("t(C_t) t={}", t);
    guarded(q, t, [&] {
      const auto rep = t_bounds(ct_simplex(t, cfg.M), vertex_family(t, cfg.M), tb);
      return detail::bracket_row(q, t, rep.estimate_low, rep.estimate_high, 1e-9);
    });
  }
  for (double t : cfg.t_grid) {
    const auto q = fmt::format("S(ct_shift) t={}", t);
    guarded(q, 2.0 / t, [&] {
      const auto op = ct_shift(t);
      const auto body = ct_simplex(t, cfg.M);
      const int n_max = static_cast<int>(std::max<std::size_t>(1, cfg.M / 4));
      auto pairs = sample_pairs(Sampler<CoordPoint>(body.sample), 16, cfg.seed);
      pairs.emplace_back(CoordPoint::vertex(t, cfg.M, 1), CoordPoint::vertex(t, cfg.M, 2));
      const auto sampled = iterate_lipschitz_profile(op, n_max, std::span<const std::pair<CoordPoint, CoordPoint>>(pairs), false);
      const auto exact = iterate_lipschitz_profile<CoordPoint>(op, n_max, {}, true);
      return detail::bracket_row(q, 2.0 / t, sampled.s_value, exact.s_value, 1e-9);
    });
  }
  guarded("S(retraction_compose)", 2.0, [&] {
    const auto op = composed_g();
    const int n_max = std::min(4, level);
    const auto body = cone_hull(0.0, level);
    auto pairs = sample_pairs(Sampler<GridFunction>(body.sample), 16, cfg.seed);
    pairs.push_back(detail::retraction_witness(level, n_max));
    const auto sampled =
        iterate_lipschitz_profile(op, n_max, std::span<const std::pair<GridFunction, GridFunction>>(pairs), false);
    const auto exact = iterate_lipschitz_profile<GridFunction>(op, n_max, {}, true);
    return detail::bracket_row("S(retraction_compose)", 2.0, sampled.s_value, exact.s_value, 0.02);
  });
  guarded("1+r(1) L1", 2.0, [&] {
    const int lv = std::max(level, 14);
    const auto fam = peak_family(4, lv, lv);
    const auto check = opial_cross_check(std::span<const GridFunction>(fam.terms), GridFunction::constant(1.0, lv),
                                          cfg.window_fraction);
    return detail::bracket_row("1+r(1) L1", 2.0, check.value, opial_one_plus_r("L1"), 0.02);
  });
  guarded("star_defect peaks z=1_[1/2 1)", 0.0, [&] {
    const auto fam = peak_family(4, level, level);
    const double d = star_equality_defect(std::span<const GridFunction>(fam.terms), indicator(0.5, 1.0, level),
                                          {cfg.window_fraction});
    return detail::bound_row("star_defect peaks z=1_[1/2 1)", 0.0, d, 0.0625);
  });
  {
    auto half_diameter = [&](const auto& body, const auto& fam) {
      const auto q = fmt::format("half_diameter {}", body.name);
      guarded(q, 1.0, [&] {
        using P = typename std::decay_t<decltype(fam.terms)>::value_type;
        const std::span<const P> seq(fam.terms);
        const auto [limit, quality] = detect_limit(seq, cfg.window_fraction);
        return detail::bound_row(q, diameter(body) / 2.0, limsup_distance(limit, seq, cfg.window_fraction), 1e-6);
      });
    };
    half_diameter(density_simplex(level), peak_family(4, level, level));
    half_diameter(cone_hull(0.5, level), peak_family(4, level, level));
    half_diameter(unit_ball(level), peak_family(4, level, level));
    half_diameter(ct_simplex(1.5, cfg.M), vertex_family(1.5, cfg.M));
  }
  for (int p : {1, 2, 4}) {
    const auto q = fmt::format("a(1/2) p={}", p);
    const double expected = std::pow(2.0, 1.0 / p);
    guarded(q, expected, [&] {
      const double pp = p;
      const double a = orlicz_a([pp](double t) { return std::pow(t, 1.0 / pp); }, 0.5);
      return detail::value_row(q, expected, a, 1e-6);
    });
  }
  return rows;
}

inline CommandOutput cmd_reproduce(const ExperimentConfig& cfg) {
  const auto rows = reproduce_rows(cfg);
  CommandOutput out;
  std::string csv = std::string(reproduce_csv_header) + "\n";
  std::size_t failed = 0;
  bool errored = false;
  for (const auto& r : rows) {
    csv += csv_row(r) + "\n";
    if (!r.pass) {
      ++failed;
      out.summary += fmt::format("failing row: {} {}\n", r.quantity, r.note);
    }
    errored = errored || r.note.rfind("error:", 0) == 0;
  }
  out.main = std::move(csv);
  out.summary += fmt::format("{} of {} rows pass\n", rows.size() - failed, rows.size());
  out.exit_code = errored ? 2 : (failed ? 1 : 0);
  return out;
}

// ---------------------------------------------------------------------------
// sharpness

struct SharpnessRow {
  double t = 0.0;
  double s_value = 0.0;
  double s_exact = 0.0;
  double t_low = 0.0;
  double t_high = 0.0;
  bool condition = false;
  double margin = 0.0;
  bool condition_below = false;  // at S' = 2/t - 0.01
  std::string solver_status;
  bool pass = false;
};

inline constexpr std::string_view sharpness_csv_header =
    "t,S,S_exact,t_low,t_high,condition,margin,condition_below,solver_status,pass";

inline std::string csv_row(const SharpnessRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", r.t, r.s_value, r.s_exact, r.t_low, r.t_high,
                     r.condition ? "true" : "false", r.margin, r.condition_below ? "true" : "false", r.solver_status,
                     r.pass ? "pass" : "fail");
}

inline SharpnessRow sharpness_row(double t, const ExperimentConfig& cfg) {
  SharpnessRow row;
  row.t = t;
  const auto op = ct_shift(t);
  const auto body = ct_simplex(t, cfg.M);
  const int n_max = static_cast<int>(std::max<std::size_t>(1, cfg.M / 4));
  row.s_value = iterate_lipschitz_profile<CoordPoint>(op, n_max, {}, true).s_value;
  row.s_exact = 2.0 / t;
  const auto rep = t_bounds(body, vertex_family(t, cfg.M));
  row.t_low = rep.estimate_low;
  row.t_high = rep.estimate_high;
  const auto v = theorem_condition(row.s_value, row.t_high, opial_one_plus_r("L1"));
  row.condition = v.holds;
  row.margin = v.margin;
  row.condition_below = theorem_condition(row.s_exact - 0.01, t, 2.0).holds;
  SolveOptions so;
  so.tol = cfg.tol;
  so.seed = cfg.seed;
  so.max_outer = cfg.max_outer;
  so.window_fraction = cfg.window_fraction;
  so.s_value = row.s_value;
  const auto x0 = pick_start(op, body, cfg.seed, 2 * so.extraction.min_length + 1);
  row.solver_status = std::string(to_string(solve(op, body, x0, so).status));
  row.pass = !row.condition && row.condition_below && row.solver_status != "fixed_point" &&
             std::abs(row.s_value - row.s_exact) <= 1e-9 && row.t_low <= t + 1e-9 && t <= row.t_high + 1e-9;
  return row;
}

inline CommandOutput cmd_sharpness(const ExperimentConfig& cfg) {
  CommandOutput out;
  out.main = std::string(sharpness_csv_header) + "\n";
  std::size_t failed = 0;
  for (double t : cfg.t_grid) {
    const auto row = sharpness_row(t, cfg);
    out.main += csv_row(row) + "\n";
    if (!row.pass) {
      ++failed;
      out.summary += fmt::format("failing row: t = {}\n", t);
    }
  }
  out.summary += fmt::format("{} of {} rows pass\n", cfg.t_grid.size() - failed, cfg.t_grid.size());
  out.exit_code = failed ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// solve and coeff

namespace detail {

inline nlohmann::json point_json(const GridFunction& f) {
  if (f.size() <= 4096) return f;
  return {{"level", f.level()}, {"l1_norm", l1_norm(f)}, {"integral", integral(f)}};
}
inline nlohmann::json point_json(const CoordPoint& x) { return x; }

inline nlohmann::json step_json(const StepReport& s) {
  return {{"r_estimate", s.r_estimate},
          {"eps", s.eps},
          {"rho", s.rho},
          {"branch", s.branch},
          {"x_condition", std::isfinite(s.x_condition) ? nlohmann::json(s.x_condition) : nlohmann::json()},
          {"z_condition", std::isfinite(s.z_condition) ? nlohmann::json(s.z_condition) : nlohmann::json()},
          {"displacement", s.displacement},
          {"displacement_bound", s.displacement_bound},
          {"r_next", s.r_next},
          {"decay_verified", s.decay_verified},
          {"displacement_verified", s.displacement_verified},
          {"flags", s.flags}};
}

inline int default_level(const ExperimentConfig& cfg) {
  if (cfg.level) return *cfg.level;
  if (cfg.command == "solve" && cfg.op.is_object()) {
    const auto name = cfg.op.value("op", "");
    if (name == "doubling" || name == "retraction_compose") return 20;
    return 8;
  }
  return 12;
}

// Bodies named "ct" take t from the operator when the body spec omits it.
inline nlohmann::json coordinate_body_spec(const ExperimentConfig& cfg) {
  nlohmann::json spec = cfg.body;
  if (!spec.contains("t") && cfg.op.is_object() && cfg.op.contains("t")) spec["t"] = cfg.op["t"];
  if (!spec.contains("M")) spec["M"] = cfg.M;
  return spec;
}

template <Point P>
CommandOutput run_solve(const AffineOperator<P>& op, const ConvexBody<P>& body, const ExperimentConfig& cfg) {
  SolveOutcome<P> res;
  const std::uint64_t min_h = 2 * ExtractionOptions{}.min_length + 1;
  const P x0 = pick_start(op, body, cfg.seed, min_h);
  if (cfg.mode == "proof") {
    SolveOptions so;
    so.tol = cfg.tol;
    so.seed = cfg.seed;
    so.max_outer = cfg.max_outer;
    so.window_fraction = cfg.window_fraction;
    res = solve(op, body, x0, so);
  } else {
    PracticalOptions po;
    po.tol = cfg.tol;
    po.seed = cfg.seed;
    res = practical_cesaro_solve(op, body, x0, po);
  }
  nlohmann::json j{{"status", std::string(to_string(res.status))},
                   {"residual", std::isfinite(res.residual) ? nlohmann::json(res.residual) : nlohmann::json()},
                   {"applications", res.applications},
                   {"point", point_json(res.point)},
                   {"membership", membership(body, res.point, cfg.tol)},
                   {"diagnostics", res.diagnostics},
                   {"config", cfg}};
  if (res.eps) j["eps"] = *res.eps;
  if (res.limit) j["limit"] = point_json(*res.limit);
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : res.steps) steps.push_back(step_json(s));
  j["steps"] = steps;
  CommandOutput out;
  out.main = j.dump(2) + "\n";
  out.trace = std::string(trace_csv_header) + "\n";
  for (const auto& r : res.trace) out.trace += csv_row(r) + "\n";
  out.summary = fmt::format("{} after {} applications, residual {}\n", to_string(res.status), res.applications,
                            res.residual);
  if (res.diagnostics.contains("membership_violation"))
    out.summary += fmt::format("limit fails membership: {}\n", res.diagnostics["membership_violation"].template get<std::string>());
  out.exit_code = res.status == SolveStatus::fixed_point ? 0 : 1;
  return out;
}

}  // namespace detail

inline CommandOutput cmd_solve(const ExperimentConfig& cfg) {
  if (!cfg.op.is_object() || !cfg.body.is_object()) throw std::invalid_argument("solve needs an operator and a body");
  if (is_coordinate_operator(cfg.op) != is_coordinate_body(cfg.body))
    throw std::invalid_argument("operator and body live on different spaces");
  if (is_coordinate_operator(cfg.op))
    return detail::run_solve(make_coord_operator(cfg.op), make_coord_body(detail::coordinate_body_spec(cfg), cfg.M),
                             cfg);
  const int level = detail::default_level(cfg);
  return detail::run_solve(make_grid_operator(cfg.op), make_grid_body(cfg.body, level), cfg);
}

namespace detail {

template <Point P>
std::vector<CoefficientReport> coefficient_reports(const ConvexBody<P>& body, const SequenceFamily<P>& fam,
                                                   const std::optional<AffineOperator<P>>& op,
                                                   const ExperimentConfig& cfg) {
  std::vector<CoefficientReport> reps;
  TBoundsOptions tb;
  tb.window_fraction = cfg.window_fraction;
  tb.recenter.seed = cfg.seed;
  reps.push_back(t_bounds(body, fam, tb));
  CoefficientReport diam;
  diam.quantity = fmt::format("diam({})", body.name);
  diam.estimate = diam.estimate_low = diam.estimate_high = diameter(body);
  diam.bound_type = BoundType::exact;
  diam.witness = "closed form";
  diam.params = {{"body", body.spec}};
  reps.push_back(diam);
  if (op) {
    const int n_max = 16;
    const auto sampled = sample_pairs(Sampler<P>(body.sample), 32, cfg.seed);
    CoefficientReport s;
    s.quantity = fmt::format("S({})", op->name);
    s.params = {{"operator", op->spec}, {"n_max", n_max}, {"pairs", 32}, {"seed", cfg.seed}};
    try {
      s.estimate_low =
          iterate_lipschitz_profile(*op, n_max, std::span<const std::pair<P, P>>(sampled), false).s_value;
    } catch (const domain_error& e) {
      s.estimate_low = NAN;
      s.flags.push_back(e.what());
    }
    if (op->lipschitz_exact) {
      s.estimate = s.estimate_high = iterate_lipschitz_profile<P>(*op, n_max, {}, true).s_value;
      s.bound_type = BoundType::exact;
      s.witness = "closed form; estimate_low from sampled pairs";
    } else {
      s.estimate = s.estimate_high = s.estimate_low;
      s.bound_type = BoundType::lower;
      s.witness = "sampled pairs";
    }
    reps.push_back(s);
  }
  return reps;
}

}  // namespace detail

inline CommandOutput cmd_coeff(const ExperimentConfig& cfg) {
  if (!cfg.body.is_object()) throw std::invalid_argument("coeff needs a body");
  std::vector<CoefficientReport> reps;
  if (is_coordinate_body(cfg.body)) {
    const auto spec = detail::coordinate_body_spec(cfg);
    const auto body = make_coord_body(spec, cfg.M);
    std::optional<AffineOperator<CoordPoint>> op;
    if (cfg.op.is_object()) op = make_coord_operator(cfg.op);
    const double t = spec.at("t").get<double>();
    reps = detail::coefficient_reports(body, vertex_family(t, spec.at("M").get<std::size_t>()), op, cfg);
  } else {
    const int level = detail::default_level(cfg);
    const auto body = make_grid_body(cfg.body, level);
    std::optional<AffineOperator<GridFunction>> op;
    if (cfg.op.is_object()) op = make_grid_operator(cfg.op);
    reps = detail::coefficient_reports(body, peak_family(std::min(4, level), level, level), op, cfg);
  }
  CommandOutput out;
  const bool as_json = cfg.out.size() >= 5 && cfg.out.compare(cfg.out.size() - 5, 5, ".json") == 0;
  if (as_json) {
    out.main = nlohmann::json(reps).dump(2) + "\n";
  } else {
    out.main = std::string(coefficient_csv_header) + "\n";
    for (const auto& r : reps) out.main += csv_row(r) + "\n";
  }
  for (const auto& r : reps)
    out.summary += fmt::format("{}: [{}, {}] ({})\n", r.quantity, r.estimate_low, r.estimate_high, to_string(r.bound_type));
  return out;
}

inline CommandOutput run_command(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.command == "reproduce") return cmd_reproduce(cfg);
  if (cfg.command == "sharpness") return cmd_sharpness(cfg);
  if (cfg.command == "solve") return cmd_solve(cfg);
  return cmd_coeff(cfg);
}

}  // namespace fptlab
