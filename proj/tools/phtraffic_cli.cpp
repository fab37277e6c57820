// phtraffic: simulate and analyse stochastic port-Hamiltonian car-following
// dynamics on a ring road.

#include <CLI11.hpp>


#include "phtraffic/commands.hpp"
#include "phtraffic/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace phtraffic;

struct Common {
  std::string scenario_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::string svg;  // "on", "off" or empty for the scenario's setting
};

void add_common(CLI::App* cmd, Common& c) {
  auto* file = cmd->add_option("--scenario", c.scenario_path, "Scenario file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset_name, "Built-in scenario: fig1, fig2 or fig3")->excludes(file);
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--svg", c.svg, "Write SVG plots (on/off)")->check(CLI::IsMember({"on", "off"}));
}

ScenarioFile resolve(const Common& c, const std::string& fallback_preset = {}) {
  ScenarioFile s;
  if (!c.scenario_path.empty()) {
    s = load_scenario(c.scenario_path);
  } else if (!c.preset_name.empty()) {
    s = preset(c.preset_name);
  } else if (!fallback_preset.empty()) {
    s = preset(fallback_preset);
  } else {
    throw InvalidInput("either --scenario or --preset is required");
  }
  if (c.seed) s.sim.seed = *c.seed;
  if (!c.svg.empty()) s.output.svg = c.svg == "on";
  return s;
}

// "lo:hi:count"
void parse_range(const std::string& text, double& lo, double& hi, int& count) {
  const auto a = text.find(':');
  const auto b = text.rfind(':');
  if (a == std::string::npos || a == b) throw InvalidInput("range must look like lo:hi:count, got '" + text + "'");
  lo = parse_number(text.substr(0, a));
  hi = parse_number(text.substr(a + 1, b - a - 1));
  count = std::stoi(text.substr(b + 1));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic port-Hamiltonian car-following simulator and stability analyzer"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common sim_opts;
  std::string sim_out = "out";
  auto* sim = app.add_subcommand("simulate", "Integrate one trajectory and write CSV, manifest and plots");
  add_common(sim, sim_opts);
  sim->add_option("--out", sim_out, "Output directory");

  Common ens_opts;
  std::string ens_out = "out";
  std::size_t runs = 100;
  auto* ens = app.add_subcommand("ensemble", "Run independent replicas and write per-time moments");
  add_common(ens, ens_opts);
  ens->add_option("--out", ens_out, "Output directory");
  ens->add_option("--runs", runs, "Number of ensemble members")->check(CLI::Range(2, 1000000));

  Common spec_opts;
  std::string spec_out = "spectrum.csv";
  auto* spec = app.add_subcommand("spectrum", "Closed-form eigenvalues with dense-solver comparison");
  add_common(spec, spec_opts);
  spec->add_option("--out", spec_out, "Output CSV path (SVG is written alongside)");

  Common map_opts;
  std::string map_out = "stability.csv";
  std::string x_param = "alpha", y_param = "gamma";
  std::string x_range = "0.05:3:60", y_range = "0.05:3:60";
  std::optional<double> alpha, beta, gamma, t_gap;
  std::optional<int> n_vehicles;
  auto* map = app.add_subcommand("stability-map", "Exact and sufficient closed-loop stability over a 2-D grid");
  add_common(map, map_opts);
  map->add_option("--out", map_out, "Output CSV path (SVG is written alongside)");
  map->add_option("--x-param", x_param, "First axis: alpha, beta, gamma or t_gap");
  map->add_option("--y-param", y_param, "Second axis: alpha, beta, gamma or t_gap");
  map->add_option("--x-range", x_range, "lo:hi:count");
  map->add_option("--y-range", y_range, "lo:hi:count");
  map->add_option("--alpha", alpha, "Fixed alpha");
  map->add_option("--beta", beta, "Fixed beta");
  map->add_option("--gamma", gamma, "Fixed gamma");
  map->add_option("--t-gap", t_gap, "Fixed time gap T");
  map->add_option("--n", n_vehicles, "Number of vehicles");

  std::string preset_name;
  std::string preset_out;
  auto* pre = app.add_subcommand("preset", "Print a built-in scenario file");
  pre->add_option("name", preset_name, "fig1, fig2 or fig3")->required();
  pre->add_option("--out", preset_out, "Write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(resolve(sim_opts), sim_out, std::cerr);
    if (*ens) return cmd_ensemble(resolve(ens_opts), runs, ens_out, std::cerr);
    if (*spec) return cmd_spectrum(resolve(spec_opts), spec_out, std::cerr);
    if (*map) {
      const ScenarioFile base = resolve(map_opts, "fig3");
      StabilityGrid grid;
      grid.base = base.model;
      if (alpha) grid.base.alpha = *alpha;
      if (beta) grid.base.beta = *beta;
      if (gamma) grid.base.gamma = *gamma;
      if (t_gap) grid.base = with_parameter(grid.base, "t_gap", *t_gap);
      if (n_vehicles) grid.base.n_vehicles = *n_vehicles;
      grid.x_param = x_param;
      grid.y_param = y_param;
      parse_range(x_range, grid.x_lo, grid.x_hi, grid.x_count);
      parse_range(y_range, grid.y_lo, grid.y_hi, grid.y_count);
      return cmd_stability_map(grid, map_out, base.output.svg, std::cerr);
    }
    if (*pre) {
      const std::string text = format_scenario(preset(preset_name));
      if (preset_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(preset_out, std::ios::binary) << text;
      }
      return kExitOk;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  }
  return kExitOk;
}
