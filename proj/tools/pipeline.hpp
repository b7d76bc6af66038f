#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include <vmstab/equilibrium.hpp>

#include "scenario.hpp"

namespace vmstab::cli {

extern const char* const kVersion;

struct CostEstimate {
  int n = 0;
  long velocity_nodes = 0;
  long operator_entries = 0;        // n x n forms per assembly
  long orbit_form_entries = 0;      // (2n)^2 kernel per orbit-route assembly
  int lambda_evaluations = 0;       // operator assemblies, upper bound when a search may run
  long orbits_per_assembly = 0;     // periodic orbits per orbit-route assembly
  long q_lambda_orbits = 0;         // total over the workflow
  long trajectory_integrations = 0; // backward RK trajectories
  std::string projection;           // route at lambda = 0
  std::vector<std::string> warnings;
};

// No computation beyond building the velocity rule.
CostEstimate estimate_cost(const Scenario& s);

Equilibrium build_equilibrium(const Scenario& s);

// Runs the scenario's workflow and writes artifacts into `dir` (which must exist).
// Throws ConfigError / Error; the caller owns staging and cleanup.
void run_workflow(const Scenario& s, const std::filesystem::path& dir, bool verbose);

// --out, then [output] dir, then VMSTAB_OUTPUT_DIR, then ./vmstab-out
std::filesystem::path resolve_output_root(const Scenario& s, const std::string& flag);

// Run into a staging directory next to the final one and rename it on success; nothing is left
// behind on failure. Returns the final directory.
std::filesystem::path run_staged(const Scenario& s, const std::filesystem::path& root, bool verbose);

}  // namespace vmstab::cli
