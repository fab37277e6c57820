#include <doctest.h>

#include "phtraffic/noise.hpp"
#include "phtraffic/sde.hpp"
#include "phtraffic/stats.hpp"

#include <cmath>
#include <set>

using namespace phtraffic;

namespace {

ModelParams uncontrolled(int n = 20, double length = 141, double alpha = 1, double beta = 1, double sigma = 1) {
  ModelParams p;
  p.n_vehicles = n;
  p.ring_length = length;
  p.alpha = alpha;
  p.beta = beta;
  p.sigma = sigma;
  return p;
}

ModelParams open_loop(double x = 2.05, double sigma = 1) {
  ModelParams p = uncontrolled(20, 141, 0.5, 1, sigma);
  p.gamma = 0.1;
  p.regime = OpenLoop{x};
  return p;
}

ModelParams closed_loop(double sigma = 1) {
  ModelParams p = uncontrolled(20, 141, 0.5, 1, sigma);
  p.gamma = 1;
  p.regime = ClosedLoop{5, 1};
  return p;
}

// Uniform spacing with a smooth perturbation of positions and speeds.
ExplicitInitial perturbed(const ModelParams& p, double amplitude = 0.5) {
  const int n = p.n_vehicles;
  ExplicitInitial init;
  init.q.resize(n);
  init.p.resize(n);
  for (int i = 0; i < n; ++i) {
    const double phase = 2.0 * M_PI * i / n;
    init.q[i] = i * p.ring_length / n + amplitude * std::sin(phase) + amplitude;
    init.p[i] = 1.0 + amplitude * std::cos(3 * phase);
  }
  return init;
}

double state_distance(const State& a, const State& b) {
  return std::max((a.q - b.q).cwiseAbs().maxCoeff(), (a.p - b.p).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("derived seeds are distinct and deterministic") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(8, 3));
  CHECK(mix64(0) != mix64(1));
}

TEST_CASE("noise stream moments") {
  const NoiseStream noise(99);
  std::vector<double> draws;
  std::vector<double> block(7);
  for (std::uint64_t k = 0; k < 30000; ++k) {
    noise.fill(k, block);
    draws.insert(draws.end(), block.begin(), block.end());
  }
  const double n = static_cast<double>(draws.size());
  const double m = sample_mean(draws);
  const double v = sample_variance(draws);
  double m4 = 0.0;
  for (double x : draws) m4 += std::pow(x - m, 4);
  m4 /= n;
  CHECK(std::abs(m) < 5.0 / std::sqrt(n));
  CHECK(std::abs(v - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));

  // Same (seed, step) gives the same draws; different steps differ.
  std::vector<double> a(5), b(5), c(5);
  noise.fill(17, a);
  noise.fill(17, b);
  noise.fill(18, c);
  CHECK(a == b);
  CHECK(a != c);
  // A longer request starts with the same draws.
  std::vector<double> longer(8);
  noise.fill(17, longer);
  CHECK(std::equal(a.begin(), a.end(), longer.begin()));
}

TEST_CASE("equilibrium step is a rigid rotation") {
  for (const ModelParams& p : {uncontrolled(20, 141, 1, 1, 0), open_loop(2.05, 0), closed_loop(0)}) {
    State s = initial_state(UniformStationary{}, p);
    if (p.is_uncontrolled()) s.p.setConstant(3.0);
    const std::vector<double> zero(20, 0.0);
    const State next = step(s, p, quadratic_potential(p), 0.01, zero);
    CHECK((next.p - s.p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((next.q - (s.q + 0.01 * s.p)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("step uses the updated speed for positions") {
  ModelParams p = uncontrolled(2, 10, 0, 0, 2);
  const State s{Eigen::Vector2d(0, 5), Eigen::Vector2d(1, 1)};
  const std::vector<double> noise{1.0, -0.5};
  const State next = step(s, p, quadratic_potential(p), 0.25, noise);
  // p+ = p + sigma sqrt(dt) xi = 1 + 2 * 0.5 * xi
  CHECK(next.p[0] == doctest::Approx(2.0));
  CHECK(next.p[1] == doctest::Approx(0.5));
  CHECK(next.q[0] == doctest::Approx(0.5));
  CHECK(next.q[1] == doctest::Approx(5.125));

  const State again = step(s, p, quadratic_potential(p), 0.25, noise);
  CHECK(again.q == next.q);
  CHECK(again.p == next.p);

  CHECK_THROWS_AS(step(s, p, quadratic_potential(p), 0.25, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("step reports blowup with its index") {
  ModelParams p = uncontrolled(2, 10, 0, 0, 1);
  const State s{Eigen::Vector2d(0, 5), Eigen::Vector2d(0, 0)};
  try {
    step(s, p, quadratic_potential(p), 1.0, std::vector<double>{2e8, 0.0}, 42);
    FAIL("expected blowup");
  } catch (const NumericalBlowup& e) {
    CHECK(e.where().step == 42);
  }
  const std::vector<double> bad{std::nan(""), 0.0};
  CHECK_THROWS_AS(step(s, p, quadratic_potential(p), 1.0, bad), NumericalBlowup);
}

TEST_CASE("energy decays without noise") {
  const ModelParams p = uncontrolled(5, 20, 1, 1, 0);
  auto max_increase = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 20;
    cfg.sample_stride = 1;
    cfg.initial = perturbed(p, 1.0);
    const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
    const auto obs = observables(ts);
    double worst = 0.0;
    for (std::size_t k = 1; k < obs.hamiltonian.size(); ++k)
      worst = std::max(worst, obs.hamiltonian[k] - obs.hamiltonian[k - 1]);
    // Relaxes to the uniform configuration moving at the initial mean speed.
    const double rest = 0.5 * p.n_vehicles * (std::pow(p.alpha * p.ring_length / p.n_vehicles, 2) + 1.0);
    CHECK(obs.hamiltonian.front() > rest + 1.0);
    CHECK(obs.hamiltonian.back() == doctest::Approx(rest).epsilon(1e-6));
    return worst;
  };
  const double coarse = max_increase(0.01);
  const double fine = max_increase(0.005);
  // Any per-step increase is discretization error and shrinks with dt.
  CHECK(coarse < 1e-3);
  CHECK(fine <= 0.6 * coarse + 1e-12);
}

TEST_CASE("open-loop mean speed relaxes to x") {
  const ModelParams p = open_loop(2.05, 0);
  SimConfig cfg;
  const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
  CHECK(std::abs(mean_speed(ts.states.back().p) - 2.05) <= 1e-3);
  CHECK(ts.times.back() == doctest::Approx(250.0));
}

TEST_CASE("closed-loop equilibrium is a fixed point") {
  const ModelParams p = closed_loop(0);
  SimConfig cfg;
  cfg.t_end = 50;
  cfg.initial = UniformStationary{};
  const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
  double worst = 0.0;
  for (const auto& s : ts.states) worst = std::max(worst, drift(s, p, quadratic_potential(p)).dp.cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-9);
  CHECK((ts.states.back().p.array() - 2.05).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("first-order self-convergence") {
  const ModelParams p = closed_loop(0);
  auto endpoint = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 5;
    cfg.sample_stride = static_cast<int>(std::lround(cfg.t_end / dt));
    cfg.initial = perturbed(p);
    return simulate(p, quadratic_potential(p), cfg).states.back();
  };
  const State reference = endpoint(1e-5);
  const double e1 = state_distance(endpoint(2e-3), reference);
  const double e2 = state_distance(endpoint(1e-3), reference);
  CAPTURE(e1);
  CAPTURE(e2);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("gap sum is conserved") {
  for (const ModelParams& p : {uncontrolled(), open_loop(), closed_loop()}) {
    SimConfig cfg;
    cfg.t_end = 50;
    cfg.seed = 5;
    const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
    double worst = 0.0;
    for (const auto& s : ts.states) worst = std::max(worst, std::abs(gaps(s, p).sum() - 141.0));
    CHECK(worst <= 1e-6 * 141.0);
    CHECK(ts.states.size() == ts.times.size());
    CHECK(ts.times.size() == 501);
    for (std::size_t k = 1; k < ts.times.size(); ++k) CHECK(ts.times[k] - ts.times[k - 1] == doctest::Approx(0.1));
  }
}

TEST_CASE("mean speed follows the noise average exactly without control") {
  const ModelParams p = uncontrolled(20, 141, 1, 1, 1.5);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 5;
  cfg.sample_stride = 1;
  cfg.seed = 31;
  cfg.initial = perturbed(p);
  const TimeSeries ts = simulate(p, quadratic_potential(p), cfg);
  const NoiseStream noise(cfg.seed);
  std::vector<double> xi(20);
  double expected = cfg.initial.index() == 2 ? std::get<ExplicitInitial>(cfg.initial).p.mean() : 0.0;
  double worst = 0.0;
  for (std::size_t k = 1; k < ts.states.size(); ++k) {
    noise.fill(k - 1, xi);
    expected += p.sigma * std::sqrt(cfg.dt) * sample_mean(xi);
    worst = std::max(worst, std::abs(mean_speed(ts.states[k].p) - expected));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("same seed gives identical runs") {
  const ModelParams p = closed_loop();
  SimConfig cfg;
  cfg.t_end = 10;
  cfg.seed = 1234;
  const TimeSeries a = simulate(p, quadratic_potential(p), cfg);
  const TimeSeries b = simulate(p, quadratic_potential(p), cfg);
  cfg.seed = 1235;
  const TimeSeries c = simulate(p, quadratic_potential(p), cfg);
  bool identical = true, differs = false;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    identical = identical && a.states[k].q == b.states[k].q && a.states[k].p == b.states[k].p;
    differs = differs || a.states[k].p != c.states[k].p;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("config validation") {
  const ModelParams p = uncontrolled(3, 9);
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate(p));
  cfg.dt = 0;
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.dt = 300;
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.dt = 0.001;
  cfg.sample_stride = 0;
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.sample_stride = 1;
  cfg.initial = ExplicitInitial{Eigen::Vector3d(0, 2, 1), Eigen::Vector3d::Zero()};
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.initial = ExplicitInitial{Eigen::Vector3d(0, 2, 9), Eigen::Vector3d::Zero()};
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.initial = ExplicitInitial{Eigen::Vector2d(0, 2), Eigen::Vector2d::Zero()};
  CHECK_THROWS_AS(cfg.validate(p), InvalidInput);
  cfg.initial = ExplicitInitial{Eigen::Vector3d(0, 2, 8.5), Eigen::Vector3d::Zero()};
  CHECK_NOTHROW(cfg.validate(p));

  SimConfig counts;
  counts.dt = 0.001;
  counts.t_end = 250;
  CHECK(counts.step_count() == 250000);
  counts.dt = 0.3;
  counts.t_end = 1;
  CHECK(counts.step_count() == 4);
}

TEST_CASE("overtaking is flagged, not fatal") {
  const ModelParams p = uncontrolled(2, 100, 0, 0, 0);
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1;
  cfg.initial = ExplicitInitial{Eigen::Vector2d(0, 1), Eigen::Vector2d(10, 0)};
  CHECK(simulate(p, quadratic_potential(p), cfg).overtake_flag);

  const ModelParams calm = uncontrolled(20, 141, 1, 1, 0);
  SimConfig quiet;
  quiet.t_end = 10;
  CHECK_FALSE(simulate(calm, quadratic_potential(calm), quiet).overtake_flag);
}

TEST_CASE("simulate keeps the samples before a blowup") {
  const ModelParams p = open_loop(2e8, 0);
  SimConfig cfg;
  cfg.t_end = 250;
  try {
    simulate(p, quadratic_potential(p), cfg);
    FAIL("expected blowup");
  } catch (const NumericalBlowup& e) {
    REQUIRE(e.partial() != nullptr);
    CHECK(e.partial()->blowup.has_value());
    CHECK(e.where().time > 0.0);
    CHECK(e.where().time == doctest::Approx((e.where().step + 1) * cfg.dt));
    CHECK(e.partial()->times.back() <= e.where().time);
    CHECK(!e.partial()->states.empty());
  }
}

TEST_CASE("ensembles") {
  const ModelParams p = uncontrolled();
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 2;
  cfg.sample_stride = 1;
  cfg.seed = 77;

  SUBCASE("single member equals simulate with the derived seed") {
    const auto runs = run_ensemble(p, quadratic_potential(p), cfg, 1);
    REQUIRE(runs.size() == 1);
    const TimeSeries direct = simulate(p, quadratic_potential(p), ensemble_member_config(cfg, 0));
    CHECK(runs[0].states.back().p == direct.states.back().p);
  }
  SUBCASE("members differ and are ordered by index") {
    const auto runs = run_ensemble(p, quadratic_potential(p), cfg, 4, 3);
    for (std::size_t i = 0; i < runs.size(); ++i) CHECK(runs[i].config.seed == derive_seed(77, i));
    bool all_equal = true;
    for (int k = 1; k <= 100; ++k) all_equal = all_equal && runs[0].states[k].p == runs[1].states[k].p;
    CHECK_FALSE(all_equal);
  }
  SUBCASE("result does not depend on thread count") {
    auto last = [](const TimeSeries& ts) { return mean_speed(ts.states.back().p); };
    CHECK(run_ensemble_reduce(p, quadratic_potential(p), cfg, 6, last, 1) ==
          run_ensemble_reduce(p, quadratic_potential(p), cfg, 6, last, 4));
  }
  SUBCASE("blowup is recorded per member") {
    const ModelParams wild = open_loop(2e8, 0);
    SimConfig c = cfg;
    c.t_end = 250;
    c.sample_stride = 100;
    const auto runs = run_ensemble(wild, quadratic_potential(wild), c, 3);
    REQUIRE(runs.size() == 3);
    for (const auto& r : runs) CHECK(r.blowup.has_value());
  }
  SUBCASE("invalid size") { CHECK_THROWS_AS(run_ensemble(p, quadratic_potential(p), cfg, 0), InvalidInput); }
}

TEST_CASE("uncontrolled mean-speed variance grows like sigma^2 t / N") {
  const ModelParams p = uncontrolled();
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 100;
  cfg.sample_stride = 10000;
  cfg.seed = 2718;
  const auto finals = run_ensemble_reduce(p, quadratic_potential(p), cfg, 500,
                                          [](const TimeSeries& ts) { return mean_speed(ts.states.back().p); });
  CHECK(sample_variance(finals) == doctest::Approx(100.0 / 20.0).epsilon(0.15));
}

TEST_CASE("parallel_for propagates exceptions") {
  CHECK_THROWS_AS(parallel_for(
                      10, [](std::size_t i) { if (i == 7) throw InvalidInput("boom"); }, 3),
                  InvalidInput);
  std::vector<int> hits(50, 0);
  parallel_for(50, [&](std::size_t i) { hits[i] += 1; }, 4);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}
