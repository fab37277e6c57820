#pragma once

// Time integration of the car-following SDE.
//
// Speeds take an explicit Euler-Maruyama step, positions then advance with
// the updated speed:
//
//   p+ = p + dt * a(q, p) + sigma * sqrt(dt) * xi
//   q+ = q + dt * p+

#include "phtraffic/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace phtraffic {

/// q_n = (n-1) L / N, p_n = equilibrium speed of the regime.
struct UniformStationary {};
/// q_n = (n-1) L / N, p_n = 0.
struct UniformZeroSpeed {};
struct ExplicitInitial {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

using InitialCondition = std::variant<UniformStationary, UniformZeroSpeed, ExplicitInitial>;

struct SimConfig {
  double dt = 0.001;
  double t_end = 250.0;
  int sample_stride = 100;
  std::uint64_t seed = 0;
  InitialCondition initial = UniformZeroSpeed{};

  void validate(const ModelParams& params) const;
  /// ceil(t_end / dt), ignoring rounding noise in the quotient.
  std::uint64_t step_count() const;
};

State initial_state(const InitialCondition& initial, const ModelParams& params);

/// Speeds beyond this magnitude abort a run.
inline constexpr double kBlowupSpeed = 1e8;

struct Blowup {
  std::uint64_t step = 0;
  double time = 0.0;
};

struct TimeSeries {
  std::vector<double> times;
  std::vector<State> states;
  ModelParams params;
  PotentialSpec potential;
  SimConfig config;
  bool overtake_flag = false;
  std::optional<Blowup> blowup;
};

/// Raised when the state leaves the finite range. The samples recorded
/// before the failure are kept in partial().
class NumericalBlowup : public NumericalFailure {
 public:
  NumericalBlowup(const std::string& what, Blowup where, std::shared_ptr<const TimeSeries> partial = {})
      : NumericalFailure(what), where_(where), partial_(std::move(partial)) {}
  const Blowup& where() const { return where_; }
  const TimeSeries* partial() const { return partial_.get(); }

 private:
  Blowup where_;
  std::shared_ptr<const TimeSeries> partial_;
};

/// One integrator step. `noise` holds N standard normal draws; it is scaled
/// by sigma sqrt(dt) here. `step_index` only labels a blowup.
State step(const State& state, const ModelParams& params, const PotentialSpec& potential, double dt,
           std::span<const double> noise, std::uint64_t step_index = 0);

TimeSeries simulate(const ModelParams& params, const PotentialSpec& potential, const SimConfig& config);

/// Config of ensemble member `run_index`: same as `config` with a derived seed.
SimConfig ensemble_member_config(const SimConfig& config, std::uint64_t run_index);

/// Runs fn(0) .. fn(count-1) on a pool of worker threads. Exceptions from
/// fn are rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

/// Simulates `n_runs` members and maps each through `reduce` as soon as it
/// finishes, so full trajectories need not be kept. Blown-up members are
/// reduced from their partial series, with `blowup` set.
template <class Reduce>
auto run_ensemble_reduce(const ModelParams& params, const PotentialSpec& potential, const SimConfig& config,
                         std::size_t n_runs, Reduce reduce, unsigned threads = 0)
    -> std::vector<decltype(reduce(std::declval<const TimeSeries&>()))> {
  using R = decltype(reduce(std::declval<const TimeSeries&>()));
  if (n_runs < 1) throw InvalidInput("run_ensemble: n_runs must be at least 1");
  std::vector<std::optional<R>> slots(n_runs);
  parallel_for(
      n_runs,
      [&](std::size_t i) {
        const SimConfig member = ensemble_member_config(config, i);
        try {
          const TimeSeries ts = simulate(params, potential, member);
          slots[i].emplace(reduce(ts));
        } catch (const NumericalBlowup& e) {
          slots[i].emplace(reduce(*e.partial()));
        }
      },
      threads);
  std::vector<R> out;
  out.reserve(n_runs);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<TimeSeries> run_ensemble(const ModelParams& params, const PotentialSpec& potential,
                                     const SimConfig& config, std::size_t n_runs, unsigned threads = 0);

}  // namespace phtraffic
