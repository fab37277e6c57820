#include "phtraffic/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace phtraffic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_regime(bool ok, const char* op) {
  if (!ok) throw InvalidInput(std::string(op) + ": wrong control regime");
}

/// Assembles the spectrum from per-mode characteristic coefficients.
template <class Coeffs>
Spectrum assemble(const ModelParams& params, Coeffs coeffs) {
  const int n = params.n_vehicles;
  Spectrum s;
  s.regime = params.regime;
  s.entries.reserve(2 * n);
  for (int j = 0; j < n; ++j) {
    const auto [b, c] = coeffs(j);
    const auto roots = quadratic_roots(b, c);
    s.entries.push_back({{j, 0}, roots[0]});
    s.entries.push_back({{j, 1}, roots[1]});
  }
  return s;
}

}  // namespace

std::vector<Complex> Spectrum::values() const {
  std::vector<Complex> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.lambda);
  return out;
}

double mu(int j, int n) {
  if (n < 1 || j < 0 || j >= n) throw InvalidInput("mu: mode index out of range");
  if (j == 0) return 0.0;
  return 2.0 - 2.0 * std::cos(kTwoPi * j / n);
}

std::array<Complex, 2> quadratic_roots(Complex b, Complex c) {
  const Complex root = std::sqrt(b * b - 4.0 * c);
  std::array<Complex, 2> r{0.5 * (-b + root), 0.5 * (-b - root)};
  const int big = std::abs(r[0]) >= std::abs(r[1]) ? 0 : 1;
  if (r[big] != Complex(0.0)) r[1 - big] = c / r[big];
  return r;
}

Spectrum eigenvalues_uncontrolled(const ModelParams& params) {
  params.validate();
  require_regime(params.is_uncontrolled(), "eigenvalues_uncontrolled");
  const int n = params.n_vehicles;
  const double a2 = params.alpha * params.alpha;
  return assemble(params, [&](int j) {
    const double m = mu(j, n);
    return std::pair<Complex, Complex>{params.beta * m, a2 * m};
  });
}

Spectrum eigenvalues_open_loop(const ModelParams& params) {
  params.validate();
  require_regime(params.is_open_loop(), "eigenvalues_open_loop");
  const int n = params.n_vehicles;
  const double a2 = params.alpha * params.alpha;
  return assemble(params, [&](int j) {
    const double m = mu(j, n);
    return std::pair<Complex, Complex>{params.beta * m + params.gamma, a2 * m};
  });
}

namespace {

Spectrum closed_loop_spectrum(const ModelParams& params) {
  const int n = params.n_vehicles;
  const double a2 = params.alpha * params.alpha;
  const double feedback = params.gamma / std::get<ClosedLoop>(params.regime).t_gap;
  Spectrum s = assemble(params, [&](int j) {
    const double m = mu(j, n);
    const double theta = kTwoPi * j / n;
    // 1 - omega^j, with omega = exp(2 pi i / N)
    const Complex one_minus_omega =
        j == 0 ? Complex(0.0) : Complex(1.0 - std::cos(theta), -std::sin(theta));
    return std::pair<Complex, Complex>{params.beta * m + params.gamma, a2 * m + feedback * one_minus_omega};
  });
  s.entries[0].lambda = 0.0;
  s.entries[1].lambda = -params.gamma;
  return s;
}

}  // namespace

Spectrum eigenvalues_closed_loop(const ModelParams& params) {
  params.validate();
  require_regime(params.is_closed_loop(), "eigenvalues_closed_loop");
  return closed_loop_spectrum(params);
}

Spectrum eigenvalues(const ModelParams& params) {
  if (params.is_uncontrolled()) return eigenvalues_uncontrolled(params);
  if (params.is_open_loop()) return eigenvalues_open_loop(params);
  return eigenvalues_closed_loop(params);
}

double complex_hurwitz_determinant(double kappa, double eta, double nu, double rho) {
  return kappa * (nu * kappa + rho * eta) - rho * rho;
}

bool complex_hurwitz_stable(double kappa, double eta, double nu, double rho) {
  return kappa > 0.0 && complex_hurwitz_determinant(kappa, eta, nu, rho) > 0.0;
}

bool is_structural_zero(const SpectrumEntry& entry, const ControlRegime& regime) {
  if (entry.mode.j != 0) return false;
  return std::holds_alternative<Uncontrolled>(regime) || entry.mode.k == 0;
}

double spectral_abscissa_nonzero(const Spectrum& spectrum) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : spectrum.entries) {
    if (is_structural_zero(e, spectrum.regime)) continue;
    best = std::max(best, e.lambda.real());
  }
  return best;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Stable:
      return "stable";
    case Verdict::Marginal:
      return "marginal";
    case Verdict::Unstable:
      return "unstable";
  }
  return "unknown";
}

Verdict classify_abscissa(double abscissa) {
  if (std::abs(abscissa) < kMarginalBand) return Verdict::Marginal;
  return abscissa < 0.0 ? Verdict::Stable : Verdict::Unstable;
}

StabilityReport exact_stability(const ModelParams& params) {
  params.validate_structure();
  require_regime(params.is_closed_loop(), "exact_stability");
  const int n = params.n_vehicles;
  const double t_gap = std::get<ClosedLoop>(params.regime).t_gap;
  const double feedback = params.gamma / t_gap;
  const double a2 = params.alpha * params.alpha;

  StabilityReport report;
  report.per_mode.reserve(n - 1);
  bool all_modes = true;
  for (int j = 1; j < n; ++j) {
    const double theta = kTwoPi * j / n;
    const double cj = std::cos(theta);
    const double sj = std::sin(theta);
    ModeCondition m;
    m.j = j;
    m.kappa = 2.0 * params.beta * (1.0 - cj) + params.gamma;
    m.eta = 0.0;
    m.nu = (1.0 - cj) * (feedback + 2.0 * a2);
    m.rho = -feedback * sj;
    m.hurwitz_det = complex_hurwitz_determinant(m.kappa, m.eta, m.nu, m.rho);
    m.mode_stable = complex_hurwitz_stable(m.kappa, m.eta, m.nu, m.rho);
    all_modes = all_modes && m.mode_stable;
    report.per_mode.push_back(m);
  }
  report.exact_stable = params.gamma > 0.0 && all_modes;

  const auto sufficient = sufficient_stability(params);
  report.sufficient_lhs = sufficient.lhs;
  report.sufficient_stable = sufficient.stable;

  report.spectral_abscissa_nonzero = spectral_abscissa_nonzero(closed_loop_spectrum(params));
  report.abscissa_verdict = classify_abscissa(report.spectral_abscissa_nonzero);
  return report;
}

SufficientCondition sufficient_stability(const ModelParams& params) {
  params.validate_structure();
  require_regime(params.is_closed_loop(), "sufficient_stability");
  const double t_gap = std::get<ClosedLoop>(params.regime).t_gap;
  const double at = params.alpha * t_gap;
  SufficientCondition out;
  out.lhs = params.gamma * t_gap + 2.0 * at * at;
  out.stable = params.gamma > 0.0 && out.lhs > 2.0;
  return out;
}

std::vector<Complex> dense_eigen_oracle(const Eigen::MatrixXd& b) {
  if (b.rows() != b.cols()) throw InvalidInput("dense_eigen_oracle: matrix must be square");
  // Extended precision: a defective eigenvalue is only resolved to about
  // sqrt(eps) * |B|, which in double is above the comparison tolerance.
  using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::EigenSolver<MatrixXld> solver(b.cast<long double>(), /*computeEigenvectors=*/false);
  const auto& ev = solver.eigenvalues();
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    out.emplace_back(static_cast<double>(ev[i].real()), static_cast<double>(ev[i].imag()));
  }
  if (solver.info() != Eigen::Success) {
    throw EigenNonConvergence("dense_eigen_oracle: QR iteration did not converge", std::move(out));
  }
  return out;
}

std::vector<double> match_distances(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  if (a.size() != b.size()) throw InvalidInput("match_distances: size mismatch");
  std::vector<bool> used(b.size(), false);
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& x : a) {
    std::size_t pick = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (used[i]) continue;
      const double d = std::abs(x - b[i]);
      if (d < best) {
        best = d;
        pick = i;
      }
    }
    used[pick] = true;
    out.push_back(best);
  }
  return out;
}

double multiset_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  const auto d = match_distances(a, b);
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

Eigen::MatrixXd deviation_matrix(int n) {
  if (n < 2) throw InvalidInput("deviation_matrix: n must be at least 2");
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
}

}  // namespace phtraffic
