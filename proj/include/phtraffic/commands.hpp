#pragma once

// Implementations of the command-line subcommands. Each returns a process
// exit status and writes progress to `log`.

#include "phtraffic/csv.hpp"
#include "phtraffic/scenario.hpp"
#include "phtraffic/spectral.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace phtraffic {

enum ExitStatus : int {
  kExitOk = 0,
  kExitInvalidInput = 1,
  kExitBlowup = 2,
  kExitContainmentViolation = 3,
  kExitIoError = 4,
};

/// simulate: trajectory.csv, observables.csv, manifest.ini and, if enabled,
/// simulation.svg in `out_dir`. A blowup still writes the samples recorded
/// so far and marks the manifest.
int cmd_simulate(const ScenarioFile& scenario, const std::filesystem::path& out_dir, std::ostream& log);

/// ensemble: per-time moments of the mean speed and of V(t) over `runs`
/// members in ensemble.csv, plus manifest.ini.
int cmd_ensemble(const ScenarioFile& scenario, std::size_t runs, const std::filesystem::path& out_dir,
                 std::ostream& log);

/// j, k, re, im, oracle_abs_diff. Custom potentials are rejected.
CsvTable spectrum_table(const ModelParams& params, const PotentialSpec& potential);

/// spectrum: CSV at `out_csv` and an SVG scatter next to it.
int cmd_spectrum(const ScenarioFile& scenario, const std::filesystem::path& out_csv, std::ostream& log);

/// Grid over two of alpha, beta, gamma, t_gap; the rest come from `base`,
/// which must be a closed-loop parameter set.
struct StabilityGrid {
  ModelParams base;
  std::string x_param = "alpha";
  double x_lo = 0.05, x_hi = 3.0;
  int x_count = 60;
  std::string y_param = "gamma";
  double y_lo = 0.05, y_hi = 3.0;
  int y_count = 60;

  void validate() const;
  double x_at(int i) const;
  double y_at(int i) const;
};

struct StabilityCell {
  double x = 0.0;
  double y = 0.0;
  bool exact_stable = false;
  bool sufficient_stable = false;
  double spectral_abscissa = 0.0;
  Verdict verdict = Verdict::Marginal;
};

/// Row-major over y then x: cells[iy * x_count + ix].
std::vector<StabilityCell> compute_stability_map(const StabilityGrid& grid);

/// Copy of `params` with alpha, beta, gamma or t_gap replaced.
ModelParams with_parameter(ModelParams params, const std::string& name, double value);

/// stability-map: CSV at `out_csv` (+ SVG heatmap when `svg`). Exits with
/// kExitContainmentViolation, writing nothing, if any cell is sufficient
/// but not exactly stable.
int cmd_stability_map(const StabilityGrid& grid, const std::filesystem::path& out_csv, bool svg,
                      std::ostream& log);

}  // namespace phtraffic
