#include "phtraffic/model.hpp"

#include <cmath>

namespace phtraffic {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidInput(what);
}

void check_dimension(const State& state, int n) {
  if (state.q.size() != n || state.p.size() != n) {
    throw InvalidInput("state dimension does not match n_vehicles");
  }
}

}  // namespace

std::string_view regime_name(const ControlRegime& regime) {
  return std::visit(overloaded{[](const Uncontrolled&) { return std::string_view("uncontrolled"); },
                               [](const OpenLoop&) { return std::string_view("open_loop"); },
                               [](const ClosedLoop&) { return std::string_view("closed_loop"); }},
                    regime);
}

void ModelParams::validate_structure() const {
  require(n_vehicles >= 2, "n_vehicles must be at least 2");
  require(std::isfinite(ring_length) && ring_length > 0.0, "ring_length must be positive");
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be nonnegative");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be nonnegative");
  require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be nonnegative");
  require(std::isfinite(sigma), "sigma must be finite");
  if (const auto* open = std::get_if<OpenLoop>(&regime)) {
    require(std::isfinite(open->x), "open-loop speed x must be finite");
  }
  if (const auto* closed = std::get_if<ClosedLoop>(&regime)) {
    require(std::isfinite(closed->t_gap) && closed->t_gap > 0.0, "closed-loop t_gap must be positive");
    require(std::isfinite(closed->ell) && closed->ell >= 0.0, "closed-loop ell must be nonnegative");
  }
}

void ModelParams::validate() const {
  validate_structure();
  if (is_uncontrolled()) {
    require(gamma == 0.0, "uncontrolled regime requires gamma = 0");
  } else {
    require(gamma > 0.0, "controlled regimes require gamma > 0");
  }
}

double equilibrium_speed(const ModelParams& params) {
  return std::visit(
      overloaded{[](const Uncontrolled&) { return 0.0; }, [](const OpenLoop& o) { return o.x; },
                 [&](const ClosedLoop& c) {
                   return (params.ring_length / params.n_vehicles - c.ell) / c.t_gap;
                 }},
      params.regime);
}

PotentialSpec quadratic_potential(const ModelParams& params) {
  return QuadraticPotential{params.alpha};
}

double potential_derivative(const PotentialSpec& potential, double x) {
  return std::visit(overloaded{[x](const QuadraticPotential& qp) { return qp.alpha * qp.alpha * x; },
                               [x](const CustomPotential& cp) {
                                 if (!cp.derivative) throw InvalidInput("custom potential has no derivative");
                                 return cp.derivative(x);
                               }},
                    potential);
}

double potential_value(const PotentialSpec& potential, double x) {
  return std::visit(overloaded{[x](const QuadraticPotential& qp) {
                                 const double ax = qp.alpha * x;
                                 return 0.5 * ax * ax;
                               },
                               [x](const CustomPotential& cp) {
                                 if (!cp.value) {
                                   throw UnsupportedOperation("custom potential has no value function");
                                 }
                                 return cp.value(x);
                               }},
                    potential);
}

Eigen::VectorXd gaps(const State& state, const ModelParams& params) {
  check_dimension(state, params.n_vehicles);
  const Eigen::Index n = state.q.size();
  Eigen::VectorXd dq(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) dq[i] = state.q[i + 1] - state.q[i];
  dq[n - 1] = params.ring_length + state.q[0] - state.q[n - 1];
  return dq;
}

Eigen::VectorXd speed_gaps(const State& state) {
  const Eigen::Index n = state.p.size();
  if (n < 2) throw InvalidInput("speed_gaps needs at least two vehicles");
  Eigen::VectorXd dp(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) dp[i] = state.p[i + 1] - state.p[i];
  dp[n - 1] = state.p[0] - state.p[n - 1];
  return dp;
}

bool has_overtaking(const Eigen::VectorXd& gaps) { return (gaps.array() <= 0.0).any(); }

void speed_drift(const State& state, const ModelParams& params, const PotentialSpec& potential,
                 Eigen::VectorXd& dp) {
  const int n = params.n_vehicles;
  const double length = params.ring_length;
  const auto& q = state.q;
  const auto& p = state.p;
  dp.resize(n);

  auto gap = [&](int i) { return i + 1 < n ? q[i + 1] - q[i] : length + q[0] - q[n - 1]; };
  auto speed_gap = [&](int i) { return i + 1 < n ? p[i + 1] - p[i] : p[0] - p[n - 1]; };

  // Values for index n-1 are carried across iterations.
  const double* quad_alpha = nullptr;
  if (const auto* qp = std::get_if<QuadraticPotential>(&potential)) quad_alpha = &qp->alpha;
  auto force = [&](double x) {
    return quad_alpha ? (*quad_alpha) * (*quad_alpha) * x : potential_derivative(potential, x);
  };

  double prev_gap = gap(n - 1);
  double prev_force = force(prev_gap);
  double prev_speed_gap = speed_gap(n - 1);

  for (int i = 0; i < n; ++i) {
    const double g = gap(i);
    const double f = force(g);
    const double sg = speed_gap(i);
    double acc = params.beta * (sg - prev_speed_gap) + (f - prev_force);
    if (params.gamma != 0.0) {
      double target = 0.0;
      if (const auto* open = std::get_if<OpenLoop>(&params.regime)) {
        target = open->x;
      } else if (const auto* closed = std::get_if<ClosedLoop>(&params.regime)) {
        target = (g - closed->ell) / closed->t_gap;
      }
      acc += params.gamma * (target - p[i]);
    }
    dp[i] = acc;
    prev_force = f;
    prev_speed_gap = sg;
  }
}

Drift drift(const State& state, const ModelParams& params, const PotentialSpec& potential) {
  params.validate();
  check_dimension(state, params.n_vehicles);
  Drift out;
  out.dq = state.p;
  speed_drift(state, params, potential, out.dp);
  return out;
}

double hamiltonian(const State& state, const ModelParams& params, const PotentialSpec& potential) {
  const Eigen::VectorXd dq = gaps(state, params);
  double energy = 0.5 * state.p.squaredNorm();
  for (Eigen::Index i = 0; i < dq.size(); ++i) energy += potential_value(potential, dq[i]);
  return energy;
}

Eigen::VectorXd hamiltonian_gradient(const State& state, const ModelParams& params,
                                     const PotentialSpec& potential) {
  const auto* qp = std::get_if<QuadraticPotential>(&potential);
  if (!qp) throw UnsupportedOperation("hamiltonian_gradient requires a quadratic potential");
  const int n = params.n_vehicles;
  Eigen::VectorXd grad(2 * n);
  grad.head(n) = (qp->alpha * qp->alpha) * gaps(state, params);
  grad.tail(n) = state.p;
  return grad;
}

PhsMatrices build_matrices(const ModelParams& params) {
  params.validate_structure();
  const int n = params.n_vehicles;
  using Eigen::MatrixXd;

  PhsMatrices m;
  m.a = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m.a(i, i) = -1.0;
    m.a(i, (i + 1) % n) += 1.0;
  }
  const MatrixXd ata = m.a.transpose() * m.a;
  const MatrixXd eye = MatrixXd::Identity(n, n);

  m.j_skew = MatrixXd::Zero(2 * n, 2 * n);
  m.j_skew.topRightCorner(n, n) = m.a;
  m.j_skew.bottomLeftCorner(n, n) = -m.a.transpose();

  m.r_dissip = MatrixXd::Zero(2 * n, 2 * n);
  m.r_dissip.bottomRightCorner(n, n) = params.beta * ata + params.gamma * eye;

  m.b_drift = MatrixXd::Zero(2 * n, 2 * n);
  m.b_drift.topRightCorner(n, n) = m.a;
  m.b_drift.bottomLeftCorner(n, n) = -(params.alpha * params.alpha) * m.a.transpose();
  m.b_drift.bottomRightCorner(n, n) = -params.beta * ata;
  if (!params.is_uncontrolled()) m.b_drift.bottomRightCorner(n, n) -= params.gamma * eye;
  if (const auto* closed = std::get_if<ClosedLoop>(&params.regime)) {
    m.b_drift.bottomLeftCorner(n, n) += (params.gamma / closed->t_gap) * eye;
  }

  m.sigma_block = MatrixXd::Zero(2 * n, n);
  m.sigma_block.bottomRows(n) = params.sigma * eye;
  return m;
}

Eigen::VectorXd shifted_state(const State& state, const ModelParams& params) {
  const int n = params.n_vehicles;
  Eigen::VectorXd z(2 * n);
  z.head(n) = gaps(state, params);
  double shift = 0.0;
  if (const auto* open = std::get_if<OpenLoop>(&params.regime)) shift = -open->x;
  if (const auto* closed = std::get_if<ClosedLoop>(&params.regime)) shift = closed->ell / closed->t_gap;
  z.tail(n) = state.p.array() + shift;
  return z;
}

Eigen::VectorXd control_input(const State& state, const ModelParams& params) {
  const int n = params.n_vehicles;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
  if (const auto* open = std::get_if<OpenLoop>(&params.regime)) {
    u.tail(n).setConstant(params.gamma * open->x);
  } else if (const auto* closed = std::get_if<ClosedLoop>(&params.regime)) {
    const Eigen::VectorXd dq = gaps(state, params);
    u.tail(n) = params.gamma * ((dq.array() - closed->ell) / closed->t_gap);
  }
  return u;
}

}  // namespace phtraffic
