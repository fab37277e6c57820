#pragma once

// Observables of simulated trajectories and the moment laws of the mean
// speed that they are checked against.

#include "phtraffic/sde.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace phtraffic {

struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> mean_speed;
  std::vector<double> speed_variance;        // V(t), 1/(N-1) normalization
  std::vector<double> single_vehicle_speed;  // p_1(t)
  std::vector<double> hamiltonian;
};

double mean_speed(const Eigen::VectorXd& p);

/// V = 1/(N-1) sum_n (p_n - mean)^2.
double speed_variance(const Eigen::VectorXd& p);

/// The Hamiltonian column is NaN when the potential has no value function.
ObservableSeries observables(const TimeSeries& ts);

struct MomentLaw {
  ControlRegime regime;
  std::function<double(double)> mean_of_mean_speed;
  std::function<double(double)> variance_of_mean_speed;
  std::optional<double> stationary_variance;
};

/// Law of the mean speed started from a deterministic value.
///   uncontrolled: mean m0, variance sigma^2 t / N
///   open loop:    mean x + (m0 - x) e^{-gamma t},
///                 variance sigma^2 (1 - e^{-2 gamma t}) / (2 gamma N)
/// Closed loop is not autonomous in the mean speed and is rejected.
MomentLaw mean_speed_law(const ModelParams& params, double initial_mean_speed = 0.0);

/// Row k is M p(t_k), the deviation of each speed from the instantaneous
/// mean.
Eigen::MatrixXd deviation_process(const TimeSeries& ts);

// Estimation helpers ---------------------------------------------------------

double sample_mean(std::span<const double> x);
/// Unbiased (n-1) sample variance.
double sample_variance(std::span<const double> x);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Two-sided band for the sample variance of `n` i.i.d. normal draws with
/// true variance `variance`: variance * chi2_{n-1}(q) / (n-1).
Interval chi_square_variance_band(double variance, std::size_t n, double confidence);

/// Student-t confidence interval for the mean of independent values.
Interval mean_confidence_interval(std::span<const double> x, double confidence);

/// Per-time statistics across ensemble members. All members must share
/// the same sample times; members that stopped early are truncated to the
/// shortest length.
struct EnsembleMoments {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> variance;
};

EnsembleMoments ensemble_moments(std::span<const double> times, const std::vector<std::vector<double>>& series);

/// Indices with lo <= t <= hi.
std::vector<std::size_t> window_indices(std::span<const double> times, double lo, double hi);

/// Slope of log(values) against time over [lo, hi].
double log_growth_rate(std::span<const double> times, std::span<const double> values, double lo, double hi);

/// Propagation speed of speed disturbances in the road frame, from the lag
/// that maximizes the correlation between each vehicle's speed and that of
/// its leader over [lo, hi]. A disturbance travelling upstream reaches the
/// leader first, so p_n(t) ~ p_{n+1}(t - lag) and the wave speed is
/// mean speed - mean gap / lag. Returns nullopt if no positive correlation
/// peak exists within max_lag.
std::optional<double> estimate_wave_speed(const TimeSeries& ts, double lo, double hi, double max_lag);

}  // namespace phtraffic
