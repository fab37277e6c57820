#include "phtraffic/stats.hpp"

#include "phtraffic/spectral.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace phtraffic {

double mean_speed(const Eigen::VectorXd& p) { return p.mean(); }

double speed_variance(const Eigen::VectorXd& p) {
  const Eigen::Index n = p.size();
  if (n < 2) throw InvalidInput("speed_variance needs at least two vehicles");
  const double m = p.mean();
  return (p.array() - m).square().sum() / static_cast<double>(n - 1);
}

ObservableSeries observables(const TimeSeries& ts) {
  if (ts.states.empty()) throw InvalidInput("observables: empty time series");
  if (ts.params.n_vehicles < 2) throw InvalidInput("observables: speed variance needs N >= 2");
  const bool has_energy = !(std::holds_alternative<CustomPotential>(ts.potential) &&
                            !std::get<CustomPotential>(ts.potential).value);
  ObservableSeries out;
  out.times = ts.times;
  const std::size_t k = ts.states.size();
  out.mean_speed.reserve(k);
  out.speed_variance.reserve(k);
  out.single_vehicle_speed.reserve(k);
  out.hamiltonian.reserve(k);
  for (const auto& s : ts.states) {
    out.mean_speed.push_back(mean_speed(s.p));
    out.speed_variance.push_back(speed_variance(s.p));
    out.single_vehicle_speed.push_back(s.p[0]);
    out.hamiltonian.push_back(has_energy ? hamiltonian(s, ts.params, ts.potential)
                                         : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

MomentLaw mean_speed_law(const ModelParams& params, double initial_mean_speed) {
  params.validate();
  const double s2n = params.sigma * params.sigma / params.n_vehicles;
  MomentLaw law;
  law.regime = params.regime;
  if (params.is_uncontrolled()) {
    law.mean_of_mean_speed = [m0 = initial_mean_speed](double) { return m0; };
    law.variance_of_mean_speed = [s2n](double t) { return s2n * t; };
    return law;
  }
  if (const auto* open = std::get_if<OpenLoop>(&params.regime)) {
    const double x = open->x;
    const double g = params.gamma;
    law.mean_of_mean_speed = [x, g, m0 = initial_mean_speed](double t) { return x + (m0 - x) * std::exp(-g * t); };
    law.variance_of_mean_speed = [s2n, g](double t) { return s2n * (-std::expm1(-2.0 * g * t)) / (2.0 * g); };
    law.stationary_variance = s2n / (2.0 * g);
    return law;
  }
  throw UnsupportedOperation("mean_speed_law: the closed-loop mean speed has no autonomous law");
}

Eigen::MatrixXd deviation_process(const TimeSeries& ts) {
  const int n = ts.params.n_vehicles;
  const Eigen::MatrixXd m = deviation_matrix(n);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ts.states.size()), n);
  for (std::size_t k = 0; k < ts.states.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = (m * ts.states[k].p).transpose();
  }
  return out;
}

double sample_mean(std::span<const double> x) {
  if (x.empty()) throw InvalidInput("sample_mean: empty input");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw InvalidInput("sample_variance: need at least two values");
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw InvalidInput("fit_line: need >= 3 paired values");
  const double n = static_cast<double>(x.size());
  const double mx = sample_mean(x);
  const double my = sample_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("fit_line: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  return fit;
}

Interval chi_square_variance_band(double variance, std::size_t n, double confidence) {
  if (n < 2 || !(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidInput("chi_square_variance_band: need n >= 2 and 0 < confidence < 1");
  }
  const double dof = static_cast<double>(n - 1);
  const boost::math::chi_squared dist(dof);
  const double tail = 0.5 * (1.0 - confidence);
  return {variance * boost::math::quantile(dist, tail) / dof,
          variance * boost::math::quantile(boost::math::complement(dist, tail)) / dof};
}

Interval mean_confidence_interval(std::span<const double> x, double confidence) {
  if (x.size() < 2) throw InvalidInput("mean_confidence_interval: need at least two values");
  const double m = sample_mean(x);
  const double se = std::sqrt(sample_variance(x) / static_cast<double>(x.size()));
  const boost::math::students_t dist(static_cast<double>(x.size() - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - confidence)));
  return {m - t * se, m + t * se};
}

EnsembleMoments ensemble_moments(std::span<const double> times, const std::vector<std::vector<double>>& series) {
  if (series.size() < 2) throw InvalidInput("ensemble_moments: need at least two members");
  std::size_t len = times.size();
  for (const auto& s : series) len = std::min(len, s.size());
  EnsembleMoments out;
  out.times.assign(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(len));
  out.mean.resize(len);
  out.variance.resize(len);
  std::vector<double> column(series.size());
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t r = 0; r < series.size(); ++r) column[r] = series[r][k];
    out.mean[k] = sample_mean(column);
    out.variance[k] = sample_variance(column);
  }
  return out;
}

std::vector<std::size_t> window_indices(std::span<const double> times, double lo, double hi) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= lo && times[i] <= hi) idx.push_back(i);
  }
  return idx;
}

double log_growth_rate(std::span<const double> times, std::span<const double> values, double lo, double hi) {
  std::vector<double> x, y;
  for (std::size_t i : window_indices(times, lo, hi)) {
    if (!(values[i] > 0.0)) throw InvalidInput("log_growth_rate: values must be positive");
    x.push_back(times[i]);
    y.push_back(std::log(values[i]));
  }
  return fit_line(x, y).slope;
}

std::optional<double> estimate_wave_speed(const TimeSeries& ts, double lo, double hi, double max_lag) {
  const auto idx = window_indices(ts.times, lo, hi);
  if (idx.size() < 4) throw InvalidInput("estimate_wave_speed: window too short");
  const int n = ts.params.n_vehicles;
  const double sample_dt = ts.times[1] - ts.times[0];
  const std::size_t len = idx.size();

  // Demeaned speed history per vehicle over the window.
  Eigen::MatrixXd speeds(static_cast<Eigen::Index>(len), n);
  double mean_speed_sum = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    const auto& p = ts.states[idx[k]].p;
    speeds.row(static_cast<Eigen::Index>(k)) = p.transpose();
    mean_speed_sum += p.mean();
  }
  const double road_speed = mean_speed_sum / static_cast<double>(len);
  speeds.rowwise() -= speeds.colwise().mean();

  const auto lag_cap = static_cast<std::ptrdiff_t>(std::min<double>(max_lag / sample_dt, static_cast<double>(len) / 2));
  double best_corr = 0.0;
  std::ptrdiff_t best_lag = 0;
  for (std::ptrdiff_t lag = -lag_cap; lag <= lag_cap; ++lag) {
    if (lag == 0) continue;
    double acc = 0.0;
    double norm_a = 0.0, norm_b = 0.0;
    for (int v = 0; v < n; ++v) {
      const int leader = (v + 1) % n;
      // p_v(t) against p_leader(t - lag)
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, lag);
           k < static_cast<std::ptrdiff_t>(len) && k - lag < static_cast<std::ptrdiff_t>(len); ++k) {
        const double a = speeds(k, v);
        const double b = speeds(k - lag, leader);
        acc += a * b;
        norm_a += a * a;
        norm_b += b * b;
      }
    }
    if (norm_a == 0.0 || norm_b == 0.0) continue;
    const double corr = acc / std::sqrt(norm_a * norm_b);
    if (corr > best_corr) {
      best_corr = corr;
      best_lag = lag;
    }
  }
  if (best_lag == 0) return std::nullopt;
  const double lag_time = static_cast<double>(best_lag) * sample_dt;
  return road_speed - (ts.params.ring_length / n) / lag_time;
}

}  // namespace phtraffic
