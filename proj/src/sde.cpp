#include "phtraffic/sde.hpp"

#include "phtraffic/noise.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace phtraffic {

namespace {

// Returns false if the new state is outside the finite range.
bool advance(State& s, const ModelParams& params, const PotentialSpec& potential, double dt,
             std::span<const double> noise, Eigen::VectorXd& acc) {
  speed_drift(s, params, potential, acc);
  const double diffusion = params.sigma * std::sqrt(dt);
  const Eigen::Index n = s.p.size();
  bool finite = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    s.p[i] = s.p[i] + dt * acc[i] + diffusion * noise[i];
    s.q[i] = s.q[i] + dt * s.p[i];
    finite = finite && std::abs(s.p[i]) <= kBlowupSpeed && std::isfinite(s.q[i]);
  }
  return finite;
}

bool any_overtaking(const State& s, double length) {
  const Eigen::Index n = s.q.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (s.q[i + 1] - s.q[i] <= 0.0) return true;
  }
  return length + s.q[0] - s.q[n - 1] <= 0.0;
}

std::string blowup_message(std::uint64_t step, double time) {
  std::ostringstream msg;
  msg << "numerical blowup at step " << step << " (t = " << time << ")";
  return msg.str();
}

}  // namespace

void SimConfig::validate(const ModelParams& params) const {
  if (!(std::isfinite(dt) && dt > 0.0)) throw InvalidInput("dt must be positive");
  if (!(std::isfinite(t_end) && t_end > 0.0)) throw InvalidInput("t_end must be positive");
  if (dt > t_end) throw InvalidInput("dt must not exceed t_end");
  if (sample_stride < 1) throw InvalidInput("sample_stride must be at least 1");
  if (const auto* ex = std::get_if<ExplicitInitial>(&initial)) {
    const Eigen::Index n = params.n_vehicles;
    if (ex->q.size() != n || ex->p.size() != n) {
      throw InvalidInput("explicit initial condition has wrong dimension");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(ex->q[i] >= 0.0 && ex->q[i] < params.ring_length)) {
        throw InvalidInput("explicit initial positions must lie in [0, L)");
      }
      if (i > 0 && !(ex->q[i] > ex->q[i - 1])) {
        throw InvalidInput("explicit initial positions must be strictly increasing");
      }
      if (!std::isfinite(ex->p[i])) throw InvalidInput("explicit initial speeds must be finite");
    }
  }
}

std::uint64_t SimConfig::step_count() const {
  const double ratio = t_end / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(ratio));
}

State initial_state(const InitialCondition& initial, const ModelParams& params) {
  if (const auto* ex = std::get_if<ExplicitInitial>(&initial)) return State{ex->q, ex->p};
  const int n = params.n_vehicles;
  State s;
  s.q.resize(n);
  for (int i = 0; i < n; ++i) s.q[i] = i * params.ring_length / n;
  const double speed = std::holds_alternative<UniformStationary>(initial) ? equilibrium_speed(params) : 0.0;
  s.p = Eigen::VectorXd::Constant(n, speed);
  return s;
}

State step(const State& state, const ModelParams& params, const PotentialSpec& potential, double dt,
           std::span<const double> noise, std::uint64_t step_index) {
  params.validate();
  if (state.q.size() != params.n_vehicles || state.p.size() != params.n_vehicles ||
      noise.size() != static_cast<std::size_t>(params.n_vehicles)) {
    throw InvalidInput("step: dimension mismatch");
  }
  State next = state;
  Eigen::VectorXd acc;
  if (!advance(next, params, potential, dt, noise, acc)) {
    throw NumericalBlowup(blowup_message(step_index, 0.0), Blowup{step_index, 0.0});
  }
  return next;
}

TimeSeries simulate(const ModelParams& params, const PotentialSpec& potential, const SimConfig& config) {
  params.validate();
  config.validate(params);

  TimeSeries ts;
  ts.params = params;
  ts.potential = potential;
  ts.config = config;

  const std::uint64_t steps = config.step_count();
  const auto stride = static_cast<std::uint64_t>(config.sample_stride);
  ts.times.reserve(steps / stride + 1);
  ts.states.reserve(steps / stride + 1);

  State s = initial_state(config.initial, params);
  ts.times.push_back(0.0);
  ts.states.push_back(s);
  ts.overtake_flag = any_overtaking(s, params.ring_length);

  const NoiseStream noise(config.seed);
  std::vector<double> xi(params.n_vehicles, 0.0);
  Eigen::VectorXd acc(params.n_vehicles);

  for (std::uint64_t k = 0; k < steps; ++k) {
    if (params.sigma != 0.0) noise.fill(k, xi);
    if (!advance(s, params, potential, config.dt, xi, acc)) {
      const Blowup where{k, static_cast<double>(k + 1) * config.dt};
      ts.blowup = where;
      const std::string what = blowup_message(where.step, where.time);
      throw NumericalBlowup(what, where, std::make_shared<const TimeSeries>(std::move(ts)));
    }
    if (!ts.overtake_flag) ts.overtake_flag = any_overtaking(s, params.ring_length);
    if ((k + 1) % stride == 0) {
      ts.times.push_back(static_cast<double>(k + 1) * config.dt);
      ts.states.push_back(s);
    }
  }
  return ts;
}

SimConfig ensemble_member_config(const SimConfig& config, std::uint64_t run_index) {
  SimConfig member = config;
  member.seed = derive_seed(config.seed, run_index);
  return member;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<TimeSeries> run_ensemble(const ModelParams& params, const PotentialSpec& potential,
                                     const SimConfig& config, std::size_t n_runs, unsigned threads) {
  return run_ensemble_reduce(
      params, potential, config, n_runs, [](const TimeSeries& ts) { return ts; }, threads);
}

}  // namespace phtraffic
