#include <CLI11.hpp>

#include <iostream>

#include <vmstab/common.hpp>
#include <vmstab/parallel.hpp>

#include "pipeline.hpp"
#include "scenario.hpp"

using namespace vmstab;
using namespace vmstab::cli;

namespace {

enum Exit { kOk = 0, kNumerical = 1, kConfig = 2 };

void print_estimate(const Scenario& s, const CostEstimate& e) {
  std::cout << "scenario = " << s.name << "\n"
            << "config_hash = " << hex64(fnv1a(s.text)) << "\n"
            << "workflow = " << s.workflow << "\n"
            << "n = " << e.n << "\n"
            << "projection_at_zero = " << e.projection << "\n"
            << "velocity_nodes = " << e.velocity_nodes << "\n"
            << "matrix_size = " << e.n << " x " << e.n << " (" << e.operator_entries << " entries)\n"
            << "orbit_kernel_size = " << 2 * e.n << " x " << 2 * e.n << " (" << e.orbit_form_entries << " entries)\n"
            << "lambda_evaluations = " << e.lambda_evaluations << "\n"
            << "orbits_per_assembly = " << e.orbits_per_assembly << "\n"
            << "q_lambda_orbits = " << e.q_lambda_orbits << "\n"
            << "trajectory_integrations = " << e.trajectory_integrations << "\n";
  for (const auto& w : e.warnings) std::cout << "warning = " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear stability of radial Vlasov-Maxwell equilibria in the disk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config, workflow, out;
  int jobs = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "run the scenario's workflow and write the artifacts");
  run->add_option("config", config, "scenario file")->required();
  run->add_option("--workflow", workflow, "override [stability] workflow")
      ->check(CLI::IsMember({"verdict", "mode", "certificates", "diagnostics", "sweep"}));
  run->add_option("--out", out, "output root (default: [output] dir, $VMSTAB_OUTPUT_DIR, ./vmstab-out)");
  run->add_option("--jobs", jobs, "worker cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  run->add_flag("-q,--quiet", quiet, "no progress on stderr");

  auto* validate = app.add_subcommand("validate", "parse the scenario and estimate its cost");
  validate->add_option("config", config, "scenario file")->required();
  validate->add_option("--workflow", workflow, "override [stability] workflow")
      ->check(CLI::IsMember({"verdict", "mode", "certificates", "diagnostics", "sweep"}));

  std::string param = "K";
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "K sweep over the scenario's profile");
  sweep->add_option("config", config, "scenario file")->required();
  sweep->add_option("--param", param, "swept parameter")->check(CLI::IsMember({"K"}));
  sweep->add_option("--values", values, "values, space or comma separated")->delimiter(',');
  sweep->add_option("--out", out, "output root");
  sweep->add_option("--jobs", jobs, "worker cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  sweep->add_flag("-q,--quiet", quiet, "no progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    Scenario s = load_scenario(config);
    if (sweep->parsed()) {
      s.workflow = "sweep";
      if (!values.empty()) s.sweep_values = values;
      if (s.sweep_values.empty()) throw ConfigError("sweep: no K values (--values or [sweep] values)");
      for (double v : s.sweep_values)
        if (!(v > 0)) throw ConfigError("sweep: K values must be > 0");
    } else if (!workflow.empty()) {
      s.workflow = workflow;
      if (s.workflow == "sweep" && s.sweep_values.empty()) throw ConfigError("sweep: no K values in [sweep] values");
    }

    if (validate->parsed()) {
      print_estimate(s, estimate_cost(s));
      return kOk;
    }

    set_max_workers(jobs);
    auto root = resolve_output_root(s, out);
    auto dir = run_staged(s, root, !quiet);
    std::cout << dir.string() << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "vmstab: " << e.what() << "\n";
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "vmstab: numerical failure in " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "vmstab: " << e.what() << "\n";
    return kNumerical;
  }
}
