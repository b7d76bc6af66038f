#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <vmstab/common.hpp>

#include "pipeline.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace vmstab;
using namespace vmstab::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("vmstab-test-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string message_of(const std::string& text) {
  try {
    parse_scenario(text, "s.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kVacuum = "[profiles]\nname = vacuum\n[discretization]\nn = 16\n[output]\nname = vac\n";

}  // namespace

TEST(Cli, Fnv1a) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(hex64(fnv1a("a")), "af63dc4c8601ec8c");
}

TEST(Cli, ParseDefaultsAndValues) {
  Scenario s = parse_scenario(
      "[profiles]\nname = even_p\nscaling = momentum\nK = 8\n[discretization]\nn = 64\n"
      "[stability]\nworkflow = mode\nlambda_min = 0.05\n");
  EXPECT_EQ(s.profile, "even_p");
  EXPECT_EQ(s.scaling, "momentum");
  EXPECT_EQ(s.K, 8.0);
  EXPECT_EQ(s.n, 64);
  EXPECT_EQ(s.workflow, "mode");
  EXPECT_EQ(s.lambda_min, 0.05);
  EXPECT_EQ(s.kind, "homogeneous");
  EXPECT_FALSE(s.cross_check);
}

TEST(Cli, DiagnosticsCarryLineNumbers) {
  std::string m = message_of("[profiles]\nname = maxwellian\n[discretization]\nn = abc\n");
  EXPECT_NE(m.find("s.ini:4"), std::string::npos) << m;
  EXPECT_NE(m.find("discretization.n"), std::string::npos) << m;

  m = message_of("[profiles]\nname = maxwellian\n\n[stability]\nworkflo = mode\n");
  EXPECT_NE(m.find("s.ini:5"), std::string::npos) << m;
  EXPECT_NE(m.find("unknown"), std::string::npos) << m;

  EXPECT_NE(message_of("[discretization]\nn = 32\n"), "");
  EXPECT_NE(message_of("[profiles]\nname = maxwellian\n[discretization]\nn = 4\n"), "");
  EXPECT_NE(message_of("[profiles]\nname = maxwellian\n[stability]\nworkflow = dance\n"), "");
}

TEST(Cli, ParseList) {
  auto v = parse_list("0.25, 1 ,4", "values");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[2], 4.0);
  EXPECT_THROW(parse_list("1, x", "values"), ConfigError);
  EXPECT_THROW(parse_list("", "values"), ConfigError);
}

TEST(Cli, VerdictEstimateNeedsNoTrajectories) {
  Scenario s = parse_scenario("[profiles]\nname = damped\n[equilibrium]\nkind = volterra\nbeta = 0.1\n");
  CostEstimate e = estimate_cost(s);
  EXPECT_EQ(e.projection, "explicit");
  EXPECT_EQ(e.trajectory_integrations, 0);
  EXPECT_EQ(e.q_lambda_orbits, 0);
  EXPECT_EQ(e.n, 64);
}

TEST(Cli, OutputRootPrecedence) {
  Scenario s = parse_scenario(kVacuum);
  EXPECT_EQ(resolve_output_root(s, "/x/y"), fs::path("/x/y"));
  s.out_dir = "here";
  EXPECT_EQ(resolve_output_root(s, ""), fs::path("here"));
}

TEST(Cli, StagedRunIsDeterministic) {
  fs::path root = fresh_dir("det");
  Scenario s = parse_scenario(kVacuum);
  fs::path a = run_staged(s, root / "a", false);
  fs::path b = run_staged(s, root / "b", false);
  for (const char* f : {"summary.json", "report.txt", "equilibrium.dat", "eigenvector0.dat"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "timing.txt"));
  EXPECT_NE(slurp(a / "summary.json").find("\"verdict\": \"stable\""), std::string::npos);
  fs::remove_all(root);
}

TEST(Cli, FailedRunLeavesNothing) {
  fs::path root = fresh_dir("fail");
  Scenario s = parse_scenario(
      "[profiles]\nname = damped\n[discretization]\nn = 16\n[equilibrium]\nkind = volterra\nbeta = 0.3\n"
      "max_iter = 2\n[output]\nname = broken\n");
  EXPECT_THROW(run_staged(s, root, false), Error);
  EXPECT_TRUE(fs::is_empty(root));
  fs::remove_all(root);
}
