#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <vmstab/operators.hpp>
#include <vmstab/profiles.hpp>
#include <vmstab/stability.hpp>

namespace vmstab::cli {

// One scenario file. Sections mirror the library modules:
//   [profiles] [discretization] [equilibrium] [operators] [stability] [sweep] [output]
struct Scenario {
  std::string path;
  std::string text;  // raw bytes, hashed
  std::string name;

  // profiles
  std::string profile = "";
  std::map<std::string, double> params;
  std::string scaling = "none";  // none | amplitude | momentum | species
  double K = 1.0;
  double k_plus = 1.0, k_minus = 1.0;

  // discretization
  int n = 64;
  double quad_tol = 1e-10;
  int quad_level = 0;

  // equilibrium
  std::string kind = "homogeneous";  // homogeneous | volterra | dirichlet
  double alpha = 0, beta = 0;
  double eq_tol = 1e-12;
  int eq_max_iter = 400;

  // operators
  ProjectionMode projection = ProjectionMode::Auto;
  int rin_per_cell = 2;
  double symmetry_gate = 1e-4;
  bool cross_check = false;  // also the orbit-route kappa0 when the explicit route applies

  // stability
  std::string workflow = "verdict";  // verdict | mode | certificates | diagnostics | sweep
  double lambda_min = 1e-2, lambda_max = 1e2;
  int scan_points = 25;
  double lambda_tol = 1e-6;
  bool refine = true;
  double band_factor = 10;
  std::vector<double> diag_lambdas{0.0, 0.5, 2.0};
  bool dump_matrices = false;

  // sweep
  std::string sweep_family = "homogeneous";
  std::string sweep_scaling = "amplitude";
  std::vector<double> sweep_values;
  bool sweep_bisect = true;
  double sweep_rel_tol = 1e-4;

  // output
  std::string out_dir;  // empty: --out, then VMSTAB_OUTPUT_DIR, then ./vmstab-out
};

// Throws ConfigError with "file:line: section.key: message" diagnostics.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t h);

Profile build_profile(const Scenario& s);
std::vector<double> parse_list(const std::string& text, const std::string& what);

}  // namespace vmstab::cli
