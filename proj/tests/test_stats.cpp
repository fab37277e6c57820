#include <doctest.h>

#include "phtraffic/stats.hpp"

#include <cmath>

using namespace phtraffic;

namespace {

ModelParams uncontrolled(double sigma = 1) {
  ModelParams p;
  p.n_vehicles = 20;
  p.ring_length = 141;
  p.alpha = 1;
  p.beta = 1;
  p.sigma = sigma;
  return p;
}

ModelParams open_loop(double sigma = 1) {
  ModelParams p = uncontrolled(sigma);
  p.alpha = 0.5;
  p.gamma = 0.1;
  p.regime = OpenLoop{2.05};
  return p;
}

// Mean and variance of the mean speed by RK4 on
//   m' = -gamma (m - x),  v' = -2 gamma v + sigma^2 / N.
std::pair<double, double> moment_ode(double gamma, double x, double s2n, double m0, double t_end) {
  const int steps = 20000;
  const double h = t_end / steps;
  double m = m0, v = 0.0;
  auto fm = [&](double mm) { return -gamma * (mm - x); };
  auto fv = [&](double vv) { return -2.0 * gamma * vv + s2n; };
  for (int i = 0; i < steps; ++i) {
    const double k1 = fm(m), k2 = fm(m + 0.5 * h * k1), k3 = fm(m + 0.5 * h * k2), k4 = fm(m + h * k3);
    m += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double l1 = fv(v), l2 = fv(v + 0.5 * h * l1), l3 = fv(v + 0.5 * h * l2), l4 = fv(v + h * l3);
    v += h / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4);
  }
  return {m, v};
}

struct MeanSpeedSamples {
  std::vector<double> at10, at50, at100;
};

MeanSpeedSamples mean_speed_samples(const ModelParams& p, std::size_t runs, std::uint64_t seed) {
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 100;
  cfg.sample_stride = 1000;  // every 10 time units
  cfg.seed = seed;
  const auto rows = run_ensemble_reduce(p, quadratic_potential(p), cfg, runs, [](const TimeSeries& ts) {
    return std::array<double, 3>{mean_speed(ts.states[1].p), mean_speed(ts.states[5].p),
                                 mean_speed(ts.states[10].p)};
  });
  MeanSpeedSamples out;
  for (const auto& r : rows) {
    out.at10.push_back(r[0]);
    out.at50.push_back(r[1]);
    out.at100.push_back(r[2]);
  }
  return out;
}

// Checks sample mean and variance against the law at time t, within 3 SE.
void check_against_law(const std::vector<double>& x, const MomentLaw& law, double t) {
  const double n = static_cast<double>(x.size());
  const double v_true = law.variance_of_mean_speed(t);
  const double m_true = law.mean_of_mean_speed(t);
  CAPTURE(t);
  CHECK(std::abs(sample_mean(x) - m_true) <= 3.0 * std::sqrt(v_true / n));
  CHECK(std::abs(sample_variance(x) - v_true) <= 3.0 * v_true * std::sqrt(2.0 / (n - 1)));
}

}  // namespace

TEST_CASE("speed observables") {
  CHECK(mean_speed(Eigen::Vector3d(1, 2, 3)) == doctest::Approx(2.0));
  CHECK(speed_variance(Eigen::Vector3d(1, 2, 3)) == doctest::Approx(1.0));
  CHECK(speed_variance(Eigen::Vector4d::Constant(7)) == 0.0);
  CHECK(speed_variance(Eigen::Vector2d(0, 2)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(speed_variance(Eigen::VectorXd::Ones(1)), InvalidInput);
}

TEST_CASE("observables of a simulated run") {
  const ModelParams p = uncontrolled();
  SimConfig cfg;
  cfg.t_end = 20;
  cfg.seed = 8;
  const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
  const ObservableSeries obs = observables(ts);
  REQUIRE(obs.times.size() == ts.times.size());
  const Eigen::MatrixXd dev = deviation_process(ts);
  for (std::size_t k = 0; k < ts.states.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    // V two ways: direct formula and the squared norm of the deviation process.
    CHECK(obs.speed_variance[k] == doctest::Approx(dev.row(row).squaredNorm() / 19.0).epsilon(1e-12));
    CHECK(std::abs(dev.row(row).sum()) < 1e-10);
    CHECK((dev.row(row).transpose() + Eigen::VectorXd::Constant(20, obs.mean_speed[k]) - ts.states[k].p)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(obs.single_vehicle_speed[k] == ts.states[k].p[0]);
    CHECK(obs.hamiltonian[k] == doctest::Approx(hamiltonian(ts.states[k], p, ts.potential)));
  }

  TimeSeries custom = ts;
  custom.potential = CustomPotential{[](double x) { return x; }, {}};
  CHECK(std::isnan(observables(custom).hamiltonian.front()));
}

TEST_CASE("deviation process of a constant-speed run is zero") {
  const ModelParams p = uncontrolled(0);
  SimConfig cfg;
  cfg.t_end = 5;
  cfg.initial = ExplicitInitial{initial_state(UniformZeroSpeed{}, p).q, Eigen::VectorXd::Constant(20, 1.5)};
  const Eigen::MatrixXd dev = deviation_process(simulate(p, quadratic_potential(p), cfg));
  CHECK(dev.cwiseAbs().maxCoeff() < 1e-10);  // rounding from accumulated positions
}

TEST_CASE("moment laws") {
  const MomentLaw u = mean_speed_law(uncontrolled(), 0.3);
  CHECK(u.mean_of_mean_speed(100) == 0.3);
  CHECK(u.variance_of_mean_speed(25) == doctest::Approx(1.25));
  CHECK(u.variance_of_mean_speed(100) == doctest::Approx(5.0));
  CHECK_FALSE(u.stationary_variance.has_value());

  const MomentLaw o = mean_speed_law(open_loop(), 0.0);
  CHECK(o.mean_of_mean_speed(0) == 0.0);
  CHECK(o.variance_of_mean_speed(0) == 0.0);
  CHECK(o.mean_of_mean_speed(1000) == doctest::Approx(2.05));
  REQUIRE(o.stationary_variance.has_value());
  CHECK(*o.stationary_variance == doctest::Approx(0.25));
  CHECK(o.variance_of_mean_speed(1000) == doctest::Approx(0.25));

  for (double t : {0.5, 3.0, 10.0, 40.0}) {
    const auto [m, v] = moment_ode(0.1, 2.05, 1.0 / 20, 0.7, t);
    const MomentLaw law = mean_speed_law(open_loop(), 0.7);
    CHECK(law.mean_of_mean_speed(t) == doctest::Approx(m).epsilon(1e-10));
    CHECK(law.variance_of_mean_speed(t) == doctest::Approx(v).epsilon(1e-10));
  }

  ModelParams closed = open_loop();
  closed.regime = ClosedLoop{5, 1};
  CHECK_THROWS_AS(mean_speed_law(closed), UnsupportedOperation);
}

TEST_CASE("Monte Carlo agrees with the moment laws") {
  SUBCASE("uncontrolled") {
    const auto s = mean_speed_samples(uncontrolled(), 300, 101);
    const MomentLaw law = mean_speed_law(uncontrolled(), 0.0);
    check_against_law(s.at10, law, 10);
    check_against_law(s.at50, law, 50);
    check_against_law(s.at100, law, 100);
  }
  SUBCASE("open loop") {
    const auto s = mean_speed_samples(open_loop(), 300, 202);
    const MomentLaw law = mean_speed_law(open_loop(), 0.0);
    check_against_law(s.at10, law, 10);
    check_against_law(s.at50, law, 50);
    check_against_law(s.at100, law, 100);
  }
}

TEST_CASE("open loop keeps speed fluctuations stationary") {
  const ModelParams p = open_loop();
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 250;
  cfg.sample_stride = 100;
  cfg.seed = 303;
  struct Row {
    double mean_at_150, mean_at_250, v_slope;
  };
  const auto rows = run_ensemble_reduce(p, quadratic_potential(p), cfg, 300, [](const TimeSeries& ts) {
    const ObservableSeries obs = observables(ts);
    std::vector<double> t, v;
    for (std::size_t i : window_indices(obs.times, 200, 250)) {
      t.push_back(obs.times[i]);
      v.push_back(obs.speed_variance[i]);
    }
    return Row{obs.mean_speed[150], obs.mean_speed[250], fit_line(t, v).slope};
  });
  std::vector<double> means, slopes;
  for (const Row& r : rows) {
    means.push_back(r.mean_at_150);
    means.push_back(r.mean_at_250);
    slopes.push_back(r.v_slope);
  }
  CHECK(sample_variance(means) == doctest::Approx(0.25).epsilon(0.2));
  CHECK(mean_confidence_interval(slopes, 0.99).contains(0.0));
}

TEST_CASE("estimation helpers") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(sample_mean(x) == 2.5);
  CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
  CHECK_THROWS_AS(sample_mean(std::vector<double>{}), InvalidInput);
  CHECK_THROWS_AS(sample_variance(std::vector<double>{1}), InvalidInput);

  const std::vector<double> y{3, 5, 7, 9};
  const LinearFit fit = fit_line(x, y);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
  CHECK(fit.slope_stderr == doctest::Approx(0.0));
  CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), InvalidInput);

  // Quantiles frozen from an independent chi-square / Student-t implementation.
  const Interval band = chi_square_variance_band(1.0, 500, 0.99);
  CHECK(band.lo == doctest::Approx(421.38486042289185 / 499).epsilon(1e-12));
  CHECK(band.hi == doctest::Approx(584.1251148164498 / 499).epsilon(1e-12));
  CHECK(band.contains(1.0));
  CHECK_FALSE(band.contains(1.2));

  const std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const Interval ci = mean_confidence_interval(ten, 0.99);
  const double half = 3.2498355415921263 * std::sqrt(sample_variance(ten) / 10.0);
  CHECK(ci.lo == doctest::Approx(5.5 - half).epsilon(1e-12));
  CHECK(ci.hi == doctest::Approx(5.5 + half).epsilon(1e-12));

  const std::vector<double> t{0, 1, 2, 3, 4, 5};
  CHECK(window_indices(t, 1.5, 4) == std::vector<std::size_t>{2, 3, 4});
  std::vector<double> g;
  for (double ti : t) g.push_back(2.0 * std::exp(0.3 * ti));
  CHECK(log_growth_rate(t, g, 0, 5) == doctest::Approx(0.3).epsilon(1e-12));
  g[0] = -1;
  CHECK_THROWS_AS(log_growth_rate(t, g, 0, 5), InvalidInput);

  const EnsembleMoments em = ensemble_moments(t, {{1, 2, 3}, {3, 4, 5, 6}});
  CHECK(em.times.size() == 3);
  CHECK(em.mean == std::vector<double>{2, 3, 4});
  CHECK(em.variance == std::vector<double>{2, 2, 2});
}

TEST_CASE("wave speed of a synthetic travelling wave") {
  // p_v(t) = c + f(t + v tau) satisfies p_v(t) = p_{v+1}(t - tau), so the
  // disturbance moves back one spacing per tau: speed c - (L/N) / tau.
  const int n = 20;
  const double length = 141, tau = 1.41, sample_dt = 0.01;
  auto build = [&](double cruise) {
    TimeSeries ts;
    ts.params.n_vehicles = n;
    ts.params.ring_length = length;
    const double period = n * tau;
    for (int k = 0; k <= 6000; ++k) {
      const double t = k * sample_dt;
      State s;
      s.q.resize(n);
      s.p.resize(n);
      for (int v = 0; v < n; ++v) {
        const double phase = 2.0 * M_PI * (t + v * tau) / period;
        s.q[v] = v * length / n + cruise * t;
        s.p[v] = cruise + std::sin(phase) + 0.3 * std::cos(2 * phase);
      }
      ts.times.push_back(t);
      ts.states.push_back(s);
    }
    return ts;
  };
  const auto backward = estimate_wave_speed(build(0.0), 0, 60, 5);
  REQUIRE(backward.has_value());
  CHECK(*backward == doctest::Approx(-5.0).epsilon(1e-9));
  const auto shifted = estimate_wave_speed(build(2.0), 0, 60, 5);
  REQUIRE(shifted.has_value());
  CHECK(*shifted == doctest::Approx(-3.0).epsilon(1e-9));

  TimeSeries flat = build(1.0);
  for (auto& s : flat.states) s.p.setConstant(1.0);
  CHECK_FALSE(estimate_wave_speed(flat, 0, 60, 5).has_value());
  CHECK_THROWS_AS(estimate_wave_speed(flat, 0, 0.02, 5), InvalidInput);
}
