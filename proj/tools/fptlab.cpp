// fptlab command line: reproduce | solve | coeff | sharpness

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fptlab/fptlab.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string trace;
  std::string op;
  std::string set;
  std::optional<double> t;
  std::optional<double> a;
  std::optional<int> level;
  std::optional<std::size_t> m;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_outer;
  std::optional<double> window_fraction;
  std::string mode;
  std::vector<double> t_grid;
  std::vector<double> a_values;
};

fptlab::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot read config '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return fptlab::parse_config(buf.str());
}

fptlab::ExperimentConfig build_config(const std::string& command, const Flags& f) {
  fptlab::ExperimentConfig cfg = f.config.empty() ? fptlab::ExperimentConfig{} : load_config(f.config);
  if (!f.config.empty() && cfg.command != command)
    throw std::invalid_argument(
        fmt::format("config is for command '{}', not '{}'", cfg.command, command));
  cfg.command = command;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.trace.empty()) cfg.trace = f.trace;
  if (!f.op.empty()) {
    cfg.op = {{"op", f.op}};
    if (f.op == "ct_shift") cfg.op["t"] = f.t.value_or(1.5);
  }
  if (!f.set.empty()) {
    cfg.body = {{"set", f.set}};
    if (f.set == "cone_hull") cfg.body["a"] = f.a.value_or(0.5);
    if (f.set == "ct") cfg.body["t"] = f.t.value_or(1.5);
  }
  if (f.level) cfg.level = *f.level;
  if (f.m) cfg.M = *f.m;
  if (f.tol) cfg.tol = *f.tol;
  if (f.seed) cfg.seed = *f.seed;
  if (f.max_outer) cfg.max_outer = *f.max_outer;
  if (f.window_fraction) cfg.window_fraction = *f.window_fraction;
  if (!f.mode.empty()) cfg.mode = f.mode;
  if (!f.t_grid.empty()) cfg.t_grid = f.t_grid;
  if (!f.a_values.empty()) cfg.a_values = f.a_values;
  if (const char* env = std::getenv("FPTLAB_SEED"); env && *env) {
    std::size_t used = 0;
    const std::string s(env);
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(fmt::format("FPTLAB_SEED='{}' is not an integer", s));
    cfg.seed = v;
  }
  fptlab::validate(cfg);
  return cfg;
}

void write_to(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument(fmt::format("cannot write '{}'", path));
  out << bytes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fptlab: fixed points of affine maps on L1-type convex sets"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON experiment config");
    sub->add_option("--out", f.out, "output path (stdout when omitted)");
    sub->add_option("--seed", f.seed, "random seed (FPTLAB_SEED overrides)");
    sub->add_option("--tol", f.tol, "absolute tolerance");
    sub->add_option("--window-fraction", f.window_fraction, "trailing fraction used for limsup/liminf");
  };
  auto* reproduce = app.add_subcommand("reproduce", "table of reproduced constants");
  common(reproduce);
  reproduce->add_option("--level", f.level, "grid level");
  reproduce->add_option("--M", f.m, "coordinate truncation");
  reproduce->add_option("--t-grid", f.t_grid, "t values")->delimiter(',');
  reproduce->add_option("--a-values", f.a_values, "a values for the cone hulls")->delimiter(',');

  auto* solve = app.add_subcommand("solve", "run the fixed-point solver");
  common(solve);
  solve->add_option("--op", f.op, "doubling | retraction | retraction_compose | cyclic | ct_shift | identity");
  solve->add_option("--set", f.set, "density_simplex | cone_hull | ball | ct");
  solve->add_option("--t", f.t, "t for ct_shift / ct");
  solve->add_option("--a", f.a, "a for cone_hull");
  solve->add_option("--level", f.level, "grid level");
  solve->add_option("--M", f.m, "coordinate truncation");
  solve->add_option("--max-outer", f.max_outer, "outer iterations");
  solve->add_option("--mode", f.mode, "proof | practical");
  solve->add_option("--trace", f.trace, "trace CSV path");

  auto* coeff = app.add_subcommand("coeff", "coefficient reports for a body (and operator)");
  common(coeff);
  coeff->add_option("--op", f.op, "operator");
  coeff->add_option("--set", f.set, "body");
  coeff->add_option("--t", f.t, "t for ct_shift / ct");
  coeff->add_option("--a", f.a, "a for cone_hull");
  coeff->add_option("--level", f.level, "grid level");
  coeff->add_option("--M", f.m, "coordinate truncation");

  auto* sharpness = app.add_subcommand("sharpness", "sweep of the sharp examples over t");
  common(sharpness);
  sharpness->add_option("--t-grid", f.t_grid, "t values")->delimiter(',');
  sharpness->add_option("--M", f.m, "coordinate truncation");
  sharpness->add_option("--max-outer", f.max_outer, "outer iterations per solve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const auto cfg = build_config(command, f);
    const auto result = fptlab::run_command(cfg);
    if (cfg.out.empty())
      std::cout << result.main;
    else
      write_to(cfg.out, result.main);
    if (!cfg.trace.empty()) write_to(cfg.trace, result.trace);
    std::cerr << result.summary;
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
