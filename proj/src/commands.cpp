#include "phtraffic/commands.hpp"

#include "phtraffic/sde.hpp"
#include "phtraffic/stats.hpp"
#include "phtraffic/svg.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace phtraffic {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Verdict keys shared by the simulate and ensemble manifests.
void add_stability(KeyValues& kv, const ModelParams& params) {
  if (params.is_closed_loop()) {
    const auto report = exact_stability(params);
    kv.emplace_back("stability_verdict", report.exact_stable ? "stable" : "unstable");
    kv.emplace_back("spectral_abscissa_nonzero", format_number(report.spectral_abscissa_nonzero));
    kv.emplace_back("sufficient_lhs", format_number(report.sufficient_lhs));
    return;
  }
  const Spectrum spectrum = eigenvalues(params);
  const double abscissa = spectral_abscissa_nonzero(spectrum);
  // Without control the double zero mode lets the mean speed diffuse
  // freely, whatever the other modes do.
  const Verdict verdict = params.is_uncontrolled() ? Verdict::Marginal : classify_abscissa(abscissa);
  kv.emplace_back("stability_verdict", std::string(verdict_name(verdict)));
  kv.emplace_back("spectral_abscissa_nonzero", format_number(abscissa));
}

}  // namespace

int cmd_simulate(const ScenarioFile& scenario, const fs::path& out_dir, std::ostream& log) {
  const PotentialSpec potential = quadratic_potential(scenario.model);
  TimeSeries ts;
  bool blew_up = false;
  try {
    ts = simulate(scenario.model, potential, scenario.sim);
  } catch (const NumericalBlowup& e) {
    log << "warning: " << e.what() << "; writing partial output\n";
    ts = *e.partial();
    blew_up = true;
  }

  fs::create_directories(out_dir);
  write_csv(out_dir / "trajectory.csv", trajectory_table(ts, scenario.output.unwrapped));
  const ObservableSeries obs = observables(ts);
  write_csv(out_dir / "observables.csv", observables_table(obs));
  if (scenario.output.svg) write_text(out_dir / "simulation.svg", svg_simulation(ts, obs));

  KeyValues kv{{"command", "simulate"},
               {"samples", std::to_string(ts.times.size())},
               {"blowup", blew_up ? "1" : "0"}};
  if (ts.blowup) {
    kv.emplace_back("blowup_step", std::to_string(ts.blowup->step));
    kv.emplace_back("blowup_time", format_number(ts.blowup->time));
  }
  kv.emplace_back("overtake_flag", ts.overtake_flag ? "1" : "0");
  add_stability(kv, scenario.model);
  write_text(out_dir / "manifest.ini", format_scenario(scenario, kv));

  log << "simulate: " << ts.times.size() << " samples written to " << out_dir.string() << "\n";
  return blew_up ? kExitBlowup : kExitOk;
}

int cmd_ensemble(const ScenarioFile& scenario, std::size_t runs, const fs::path& out_dir, std::ostream& log) {
  if (runs < 2) throw InvalidInput("ensemble needs at least two runs");
  const PotentialSpec potential = quadratic_potential(scenario.model);
  struct Summary {
    std::vector<double> times, mean_speed, variance;
    bool blowup = false;
  };
  const auto members = run_ensemble_reduce(scenario.model, potential, scenario.sim, runs, [](const TimeSeries& ts) {
    const ObservableSeries obs = observables(ts);
    return Summary{obs.times, obs.mean_speed, obs.speed_variance, ts.blowup.has_value()};
  });

  std::vector<std::vector<double>> pbar, var;
  std::size_t blowups = 0;
  const std::vector<double>* longest = &members.front().times;
  for (const auto& m : members) {
    pbar.push_back(m.mean_speed);
    var.push_back(m.variance);
    blowups += m.blowup ? 1 : 0;
    if (m.times.size() > longest->size()) longest = &m.times;
  }
  const EnsembleMoments pm = ensemble_moments(*longest, pbar);
  const EnsembleMoments vm = ensemble_moments(*longest, var);

  std::optional<MomentLaw> law;
  if (!scenario.model.is_closed_loop()) {
    law = mean_speed_law(scenario.model, mean_speed(initial_state(scenario.sim.initial, scenario.model).p));
  }
  CsvTable table;
  table.header = {"t", "mean_of_mean_speed", "variance_of_mean_speed", "mean_speed_variance", "law_mean",
                  "law_variance"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < pm.times.size(); ++k) {
    const double t = pm.times[k];
    table.rows.push_back({t, pm.mean[k], pm.variance[k], vm.mean[k],
                          law ? law->mean_of_mean_speed(t) : nan, law ? law->variance_of_mean_speed(t) : nan});
  }

  fs::create_directories(out_dir);
  write_csv(out_dir / "ensemble.csv", table);
  KeyValues kv{{"command", "ensemble"}, {"runs", std::to_string(runs)}, {"samples", std::to_string(pm.times.size())},
               {"blowup", std::to_string(blowups)}};
  add_stability(kv, scenario.model);
  write_text(out_dir / "manifest.ini", format_scenario(scenario, kv));
  log << "ensemble: " << runs << " runs, " << blowups << " blowups, written to " << out_dir.string() << "\n";
  return kExitOk;
}

CsvTable spectrum_table(const ModelParams& params, const PotentialSpec& potential) {
  if (!std::holds_alternative<QuadraticPotential>(potential)) {
    throw UnsupportedOperation("spectrum: only the quadratic potential has a closed-form spectrum");
  }
  const Spectrum spectrum = eigenvalues(params);
  const std::vector<Complex> oracle = dense_eigen_oracle(build_matrices(params).b_drift);
  const std::vector<double> diff = match_distances(spectrum.values(), oracle);
  CsvTable table;
  table.header = {"j", "k", "re", "im", "oracle_abs_diff"};
  for (std::size_t i = 0; i < spectrum.entries.size(); ++i) {
    const auto& e = spectrum.entries[i];
    table.rows.push_back({static_cast<double>(e.mode.j), static_cast<double>(e.mode.k), e.lambda.real(),
                          e.lambda.imag(), diff[i]});
  }
  return table;
}

int cmd_spectrum(const ScenarioFile& scenario, const fs::path& out_csv, std::ostream& log) {
  const CsvTable table = spectrum_table(scenario.model, quadratic_potential(scenario.model));
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_csv(out_csv, table);
  if (scenario.output.svg) {
    fs::path svg = out_csv;
    svg.replace_extension(".svg");
    write_text(svg, svg_spectrum(eigenvalues(scenario.model)));
  }
  double worst = 0.0;
  for (const auto& row : table.rows) worst = std::max(worst, row[4]);
  log << "spectrum: " << table.rows.size() << " eigenvalues, max oracle difference " << format_number(worst)
      << "\n";
  return kExitOk;
}

void StabilityGrid::validate() const {
  if (!base.is_closed_loop()) throw InvalidInput("stability map needs a closed-loop base scenario");
  static const std::vector<std::string> names{"alpha", "beta", "gamma", "t_gap"};
  auto known = [&](const std::string& p) { return std::find(names.begin(), names.end(), p) != names.end(); };
  if (!known(x_param) || !known(y_param) || x_param == y_param) {
    throw InvalidInput("stability map axes must be two distinct names among alpha, beta, gamma, t_gap");
  }
  if (x_count < 2 || y_count < 2) throw InvalidInput("stability map axes need at least two points");
  if (!(x_lo < x_hi) || !(y_lo < y_hi)) throw InvalidInput("stability map ranges must satisfy lo < hi");
}

double StabilityGrid::x_at(int i) const { return x_lo + (x_hi - x_lo) * i / (x_count - 1); }
double StabilityGrid::y_at(int i) const { return y_lo + (y_hi - y_lo) * i / (y_count - 1); }

ModelParams with_parameter(ModelParams params, const std::string& name, double value) {
  if (name == "alpha") {
    params.alpha = value;
  } else if (name == "beta") {
    params.beta = value;
  } else if (name == "gamma") {
    params.gamma = value;
  } else if (name == "t_gap") {
    auto* closed = std::get_if<ClosedLoop>(&params.regime);
    if (!closed) throw InvalidInput("t_gap only exists in the closed-loop regime");
    closed->t_gap = value;
  } else {
    throw InvalidInput("unknown parameter '" + name + "'");
  }
  return params;
}

std::vector<StabilityCell> compute_stability_map(const StabilityGrid& grid) {
  grid.validate();
  std::vector<StabilityCell> cells(static_cast<std::size_t>(grid.x_count) * grid.y_count);
  parallel_for(cells.size(), [&](std::size_t index) {
    const int ix = static_cast<int>(index % grid.x_count);
    const int iy = static_cast<int>(index / grid.x_count);
    StabilityCell& cell = cells[index];
    cell.x = grid.x_at(ix);
    cell.y = grid.y_at(iy);
    const ModelParams p = with_parameter(with_parameter(grid.base, grid.x_param, cell.x), grid.y_param, cell.y);
    const StabilityReport report = exact_stability(p);
    cell.exact_stable = report.exact_stable;
    cell.sufficient_stable = report.sufficient_stable;
    cell.spectral_abscissa = report.spectral_abscissa_nonzero;
    cell.verdict = report.abscissa_verdict;
  });
  return cells;
}

int cmd_stability_map(const StabilityGrid& grid, const fs::path& out_csv, bool svg, std::ostream& log) {
  const auto cells = compute_stability_map(grid);
  std::size_t violations = 0;
  for (const auto& c : cells) {
    if (c.sufficient_stable && !c.exact_stable) {
      ++violations;
      log << "containment violation: " << grid.x_param << "=" << format_number(c.x) << " " << grid.y_param << "="
          << format_number(c.y) << " is sufficient-stable but not exact-stable\n";
    }
  }
  if (violations) {
    log << "stability-map: " << violations << " violations, no output written\n";
    return kExitContainmentViolation;
  }

  CsvTable table;
  table.header = {grid.x_param, grid.y_param, "exact_stable", "sufficient_stable", "spectral_abscissa"};
  std::vector<HeatmapCell> heat;
  for (const auto& c : cells) {
    table.rows.push_back({c.x, c.y, c.exact_stable ? 1.0 : 0.0, c.sufficient_stable ? 1.0 : 0.0, c.spectral_abscissa});
    heat.push_back({c.x, c.y, c.exact_stable, c.sufficient_stable});
  }
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  write_csv(out_csv, table);
  if (svg) {
    fs::path svg_path = out_csv;
    svg_path.replace_extension(".svg");
    write_text(svg_path, svg_stability_map(heat, grid.x_param, grid.y_param));
  }
  log << "stability-map: " << cells.size() << " cells written to " << out_csv.string() << "\n";
  return kExitOk;
}

}  // namespace phtraffic
