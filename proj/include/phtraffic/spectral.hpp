#pragma once

// Closed-form spectra of the linear drift matrix B and the stability tests
// derived from them.
//
// Every N x N block of B is circulant, so B decouples into N quadratic
// characteristic factors, one per Fourier mode j:
//
//   lambda^2 + b_j lambda + c_j = 0
//
// with mu_j = 2 - 2 cos(2 pi j / N), b_j = beta mu_j (+ gamma) and
// c_j = alpha^2 mu_j (+ (gamma/T)(1 - omega^j) in closed loop).

#include "phtraffic/model.hpp"

#include <array>
#include <complex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phtraffic {

using Complex = std::complex<double>;

struct ModeIndex {
  int j = 0;  // Fourier mode, 0 <= j < N
  int k = 0;  // root branch, 0 or 1
};

struct SpectrumEntry {
  ModeIndex mode;
  Complex lambda;
};

struct Spectrum {
  std::vector<SpectrumEntry> entries;
  ControlRegime regime;

  std::vector<Complex> values() const;
};

double mu(int j, int n);

Spectrum eigenvalues_uncontrolled(const ModelParams& params);
Spectrum eigenvalues_open_loop(const ModelParams& params);
Spectrum eigenvalues_closed_loop(const ModelParams& params);

/// Dispatches on params.regime.
Spectrum eigenvalues(const ModelParams& params);

/// Roots of lambda^2 + b lambda + c, k = 0 taking the + branch of the
/// principal square root. The smaller root is recovered through the
/// product of roots to avoid cancellation.
std::array<Complex, 2> quadratic_roots(Complex b, Complex c);

/// Hurwitz test for lambda^2 + (kappa + i eta) lambda + (nu + i rho):
/// both roots have negative real part iff kappa > 0 and
/// kappa (nu kappa + rho eta) - rho^2 > 0.
bool complex_hurwitz_stable(double kappa, double eta, double nu, double rho);
double complex_hurwitz_determinant(double kappa, double eta, double nu, double rho);

/// Structural zeros are the j = 0 roots that vanish identically: both roots
/// without control, the k = 0 root otherwise.
bool is_structural_zero(const SpectrumEntry& entry, const ControlRegime& regime);

/// Largest real part over all eigenvalues except the structural zeros.
double spectral_abscissa_nonzero(const Spectrum& spectrum);

enum class Verdict { Stable, Marginal, Unstable };

std::string_view verdict_name(Verdict v);

/// |abscissa| below this is reported as Marginal.
inline constexpr double kMarginalBand = 1e-10;

Verdict classify_abscissa(double abscissa);

struct ModeCondition {
  int j = 0;
  double kappa = 0.0;
  double nu = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  double hurwitz_det = 0.0;
  bool mode_stable = false;
};

struct StabilityReport {
  std::vector<ModeCondition> per_mode;  // j = 1 .. N-1
  bool exact_stable = false;
  double sufficient_lhs = 0.0;  // gamma T + 2 (alpha T)^2
  bool sufficient_stable = false;
  double spectral_abscissa_nonzero = 0.0;
  Verdict abscissa_verdict = Verdict::Marginal;
};

/// Closed loop only. gamma = 0 is accepted and reported unstable.
StabilityReport exact_stability(const ModelParams& params);

struct SufficientCondition {
  double lhs = 0.0;
  bool stable = false;
};

SufficientCondition sufficient_stability(const ModelParams& params);

class EigenNonConvergence : public NumericalFailure {
 public:
  EigenNonConvergence(const std::string& what, std::vector<Complex> partial)
      : NumericalFailure(what), partial_(std::move(partial)) {}
  const std::vector<Complex>& partial() const { return partial_; }

 private:
  std::vector<Complex> partial_;
};

/// Eigenvalues of a general real square matrix by a dense nonsymmetric
/// solver, independent of the circulant factorization. Throws
/// EigenNonConvergence when the QR iteration hits its cap.
std::vector<Complex> dense_eigen_oracle(const Eigen::MatrixXd& b);

/// Pairs each eigenvalue in `a`, in order, with its nearest unused
/// counterpart in `b` and returns the pair distances. Sizes must agree.
std::vector<double> match_distances(const std::vector<Complex>& a, const std::vector<Complex>& b);

/// Largest of match_distances(a, b).
double multiset_distance(const std::vector<Complex>& a, const std::vector<Complex>& b);

/// I - (1/N) 1 1^T, the projector removing the mean speed.
Eigen::MatrixXd deviation_matrix(int n);

}  // namespace phtraffic
