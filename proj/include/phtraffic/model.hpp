#pragma once

// Ring-road car-following model in port-Hamiltonian form.
//
// N vehicles with positions q and speeds p drive on a loop of length L.
// Vehicle n follows vehicle n+1; vehicle N follows vehicle 1. The state
// used by the Hamiltonian formulation is z = (dq, p) where dq are the
// gaps to the leader.

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace phtraffic {

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Control regimes ---------------------------------------------------------

struct Uncontrolled {};

/// Constant speed target x for every vehicle.
struct OpenLoop {
  double x = 0.0;
};

/// Gap feedback u_n = (dq_n - ell) / t_gap.
struct ClosedLoop {
  double ell = 0.0;
  double t_gap = 1.0;
};

using ControlRegime = std::variant<Uncontrolled, OpenLoop, ClosedLoop>;

std::string_view regime_name(const ControlRegime& regime);

struct ModelParams {
  int n_vehicles = 2;
  double ring_length = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  /// Zero is allowed and gives deterministic runs.
  double sigma = 0.0;
  ControlRegime regime = Uncontrolled{};

  /// Checks every invariant, including that gamma is zero exactly when the
  /// regime is uncontrolled. Throws InvalidInput.
  void validate() const;

  /// Same as validate() but without the regime/gamma pairing, so that
  /// stability queries can be posed at gamma = 0.
  void validate_structure() const;

  bool is_uncontrolled() const { return std::holds_alternative<Uncontrolled>(regime); }
  bool is_open_loop() const { return std::holds_alternative<OpenLoop>(regime); }
  bool is_closed_loop() const { return std::holds_alternative<ClosedLoop>(regime); }
};

/// Speed of the uniform equilibrium (all gaps L/N). Any common speed is an
/// equilibrium of the uncontrolled model; zero is returned there.
double equilibrium_speed(const ModelParams& params);

// Interaction potential ---------------------------------------------------

/// U(x) = (alpha x)^2 / 2.
struct QuadraticPotential {
  double alpha = 0.0;
};

/// Arbitrary potential given through its derivative. The value is only
/// needed for energy evaluation and may be left empty.
struct CustomPotential {
  std::function<double(double)> derivative;
  std::function<double(double)> value;
};

using PotentialSpec = std::variant<QuadraticPotential, CustomPotential>;

PotentialSpec quadratic_potential(const ModelParams& params);
double potential_derivative(const PotentialSpec& potential, double x);
double potential_value(const PotentialSpec& potential, double x);

// State and derived quantities ---------------------------------------------

/// Positions are stored unwrapped; they are reduced mod L only for output.
struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

/// dq_n = q_{n+1} - q_n, with dq_N = L + q_1 - q_N.
Eigen::VectorXd gaps(const State& state, const ModelParams& params);

/// dp_n = p_{n+1} - p_n, with dp_N = p_1 - p_N.
Eigen::VectorXd speed_gaps(const State& state);

/// True if any gap is non-positive (a vehicle reached or passed its leader).
bool has_overtaking(const Eigen::VectorXd& gaps);

struct Drift {
  Eigen::VectorXd dq;
  Eigen::VectorXd dp;
};

Drift drift(const State& state, const ModelParams& params, const PotentialSpec& potential);

/// Speed drift only, written into `dp` (resized as needed). Assumes params
/// were validated by the caller; used by the integrator.
void speed_drift(const State& state, const ModelParams& params, const PotentialSpec& potential,
                 Eigen::VectorXd& dp);

double hamiltonian(const State& state, const ModelParams& params, const PotentialSpec& potential);

/// (alpha^2 dq, p). Quadratic potentials only.
Eigen::VectorXd hamiltonian_gradient(const State& state, const ModelParams& params,
                                     const PotentialSpec& potential);

// Matrix form ---------------------------------------------------------------

struct PhsMatrices {
  Eigen::MatrixXd a;            // N x N gap differencing
  Eigen::MatrixXd j_skew;       // 2N x 2N interconnection
  Eigen::MatrixXd r_dissip;     // 2N x 2N dissipation
  Eigen::MatrixXd b_drift;      // 2N x 2N linear drift of the shifted state
  Eigen::MatrixXd sigma_block;  // 2N x N noise input
};

/// Dense matrices for the quadratic potential. B acts on the shifted state
/// returned by shifted_state(): p - x in open loop, p + ell/T in closed loop.
PhsMatrices build_matrices(const ModelParams& params);

/// z~ = (dq, p~) with the regime's speed shift applied.
Eigen::VectorXd shifted_state(const State& state, const ModelParams& params);

/// Input port U(z) = (0, gamma u(z)).
Eigen::VectorXd control_input(const State& state, const ModelParams& params);

}  // namespace phtraffic
