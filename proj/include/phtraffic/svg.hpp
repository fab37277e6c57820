#pragma once

// Minimal SVG figures for simulation output, spectra and stability maps.

#include "phtraffic/sde.hpp"
#include "phtraffic/spectral.hpp"
#include "phtraffic/stats.hpp"

#include <string>
#include <vector>

namespace phtraffic {

/// Two panels: positions mod L over time (upper), and mean speed, speed
/// variance and the speed of vehicle 1 (lower).
std::string svg_simulation(const TimeSeries& ts, const ObservableSeries& obs);

/// Eigenvalues in the complex plane.
std::string svg_spectrum(const Spectrum& spectrum);

struct HeatmapCell {
  double x = 0.0;
  double y = 0.0;
  bool exact_stable = false;
  bool sufficient_stable = false;
};

/// Stability map: exact-stable cells shaded, sufficient-stable cells
/// darker.
std::string svg_stability_map(const std::vector<HeatmapCell>& cells, const std::string& x_label,
                              const std::string& y_label);

}  // namespace phtraffic
