#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fptlab/fptlab.hpp"

using namespace fptlab;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell and captures stdout.
Run run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + FPTLAB_CLI_PATH + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fptlab_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, RoundTripsToIdenticalJson) {
  ExperimentConfig c;
  c.command = "solve";
  c.op = {{"op", "ct_shift"}, {"t", 1.25}};
  c.body = {{"set", "ct"}, {"t", 1.25}, {"M", 32}};
  c.level = 7;
  c.seed = 99;
  c.mode = "practical";
  const std::string text = nlohmann::json(c).dump();
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(nlohmann::json(back).dump(), text);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"command": "solve", "colour": 1})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"command": "dance"})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"tol": -1})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"t_grid": [2.5]})"), std::invalid_argument);
  EXPECT_THROW(parse_config("[1, 2]"), std::invalid_argument);
  EXPECT_NO_THROW(parse_config("{}"));
}

TEST(Catalog, RejectsUnknownNamesAndParameters) {
  EXPECT_THROW(make_grid_operator({{"op", "rotate"}}), std::invalid_argument);
  EXPECT_THROW(make_grid_operator({{"op", "doubling"}, {"speed", 2}}), std::invalid_argument);
  EXPECT_THROW(make_grid_body({{"set", "cube"}}, 4), std::invalid_argument);
  EXPECT_THROW(make_coord_body({{"set", "ct"}, {"t", 1.5}, {"q", 1}}, 8), std::invalid_argument);
  EXPECT_EQ(make_coord_body({{"set", "ct"}, {"t", 1.5}}, 8).spec.at("M"), 8);
  EXPECT_TRUE(is_coordinate_operator({{"op", "ct_shift"}, {"t", 1.5}}));
  EXPECT_FALSE(is_coordinate_body({{"set", "ball"}}));
}

TEST(Reproduce, AllRowsPass) {
  const auto rows = reproduce_rows(ExperimentConfig{});
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.quantity << " " << r.note;
  const auto out = cmd_reproduce(ExperimentConfig{});
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_EQ(out.main.rfind("quantity,paper_value,estimate_low,estimate_high,gap", 0), 0u);
}

TEST(Sharpness, EveryRowPasses) {
  ExperimentConfig c;
  c.command = "sharpness";
  const auto out = run_command(c);
  EXPECT_EQ(out.exit_code, 0) << out.summary;
}

TEST(Coeff, JsonWhenTheOutPathSaysSo) {
  ExperimentConfig c;
  c.command = "coeff";
  c.body = {{"set", "ct"}, {"t", 1.5}};
  c.op = {{"op", "ct_shift"}, {"t", 1.5}};
  c.M = 32;
  c.out = "report.json";
  const auto j = nlohmann::json::parse(run_command(c).main);
  ASSERT_TRUE(j.is_array());
  bool saw_t = false;
  for (const auto& r : j)
    if (r.at("quantity") == "t(ct)") {
      saw_t = true;
      EXPECT_NEAR(r.at("estimate_high").get<double>(), 1.5, 1e-9);
    }
  EXPECT_TRUE(saw_t);
  c.out.clear();
  EXPECT_EQ(run_command(c).main.rfind(std::string(coefficient_csv_header), 0), 0u);
}

TEST(Cli, ReproduceIsByteIdentical) {
  const auto a = scratch("a.csv");
  const auto b = scratch("b.csv");
  ASSERT_EQ(run_cli("reproduce --seed 5 --out " + a.string()).code, 0);
  ASSERT_EQ(run_cli("reproduce --seed 5 --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
}

TEST(Cli, SeedEnvironmentOverridesFlag) {
  const auto via_env = run_cli("solve --op cyclic --set ball --level 4 --seed 1", "FPTLAB_SEED=9");
  const auto via_flag = run_cli("solve --op cyclic --set ball --level 4 --seed 9");
  const auto other = run_cli("solve --op cyclic --set ball --level 4 --seed 1");
  EXPECT_EQ(via_env.code, 0);
  EXPECT_EQ(via_env.out, via_flag.out);
  EXPECT_NE(via_env.out, other.out);
  EXPECT_EQ(run_cli("reproduce", "FPTLAB_SEED=abc").code, 2);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("solve --op cyclic --set ball --level 6").code, 0);
  EXPECT_EQ(run_cli("solve --op ct_shift --set ct --t 1.5 --M 32").code, 1);
  EXPECT_EQ(run_cli("solve --op spin --set ball").code, 2);
  EXPECT_EQ(run_cli("solve --op cyclic --set ball --mode sideways").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
}

TEST(Cli, ConfigFileAndTrace) {
  const auto cfg = scratch("solve.json");
  const auto trace = scratch("trace.csv");
  {
    std::ofstream o(cfg);
    o << R"({"command": "solve", "op": {"op": "cyclic"}, "body": {"set": "ball"}, "level": 5})";
  }
  const auto r = run_cli("solve --config " + cfg.string() + " --trace " + trace.string());
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("status"), "fixed_point");
  EXPECT_EQ(slurp(trace).rfind(std::string(trace_csv_header), 0), 0u);
  {
    std::ofstream o(cfg);
    o << R"({"command": "solve", "surprise": true})";
  }
  EXPECT_EQ(run_cli("solve --config " + cfg.string()).code, 2);
  EXPECT_EQ(run_cli("reproduce --config " + cfg.string()).code, 2);
}
