#pragma once

// Forward curves in the Filipovic space H_beta, truncated to the span of the
// evaluation elements u_{x_1}, ..., u_{x_d}, and option pricing in the
// geometric model F(T, T_hat) = exp(<Y_T, u_{T_hat - T}>).

#include <cstdint>
#include <limits>
#include <vector>

#include "affine/covariance.hpp"

namespace affine {

/// k(s, t) = 1 + (1 - e^{-beta min(s, t)}) / beta, so <f, k(t, .)>_beta = f(t).
double kernel_eval(double beta, double s, double t);

/// Span of u_{x_j} with the basis orthonormalised by the Cholesky factor L
/// of the Gram matrix K = L L^T. A curve sum_j a_j u_{x_j} has coordinates L^T a.
class FilipovicSpace {
 public:
  FilipovicSpace() = default;
  FilipovicSpace(double beta, std::vector<double> anchors);
  /// d anchors spaced evenly on [0, x_max].
  static FilipovicSpace uniform(double beta, double x_max, int d);

  double beta() const noexcept { return beta_; }
  const std::vector<double>& anchors() const noexcept { return anchors_; }
  int dim() const noexcept { return static_cast<int>(anchors_.size()); }
  const Matrix& gram() const noexcept { return gram_; }
  const Matrix& cholesky() const noexcept { return chol_; }

  /// (k(t, x_j))_j
  Vector kernel_vector(double t) const;
  /// Coordinates of the projected evaluation element u_t.
  Vector eval_vector(double t) const;
  /// Columns eval_vector(x_j); equals L^T.
  Matrix evaluator_matrix() const { return chol_.transpose(); }
  /// Coordinates of the span curve with the given anchor values.
  Vector coords_from_values(const Vector& values) const;
  /// Generator of the adjoint shift on coordinates: d/dtau eval_vector(x_j + tau)
  /// at tau = 0+ mapped through the evaluator basis.
  Matrix shift_adjoint_generator() const;
  /// Generator A of the truncated left shift on curve coordinates.
  Matrix shift_generator() const { return shift_adjoint_generator().transpose(); }

 private:
  double beta_ = 1.0;
  std::vector<double> anchors_;
  Matrix gram_;
  Matrix chol_;
};

struct ShiftMatrix {
  Matrix matrix;  // adjoint shift: eval_vector(x_j) -> eval_vector(x_j + tau)
  /// sup over a refined grid x in [0, x_d] of ||matrix e_x - e_{x+tau}||.
  double projection_error = 0.0;
};
ShiftMatrix shift_matrix(const FilipovicSpace& space, double tau);

struct ForwardCurve {
  Vector coords;

  static ForwardCurve from_values(const FilipovicSpace& space, const Vector& anchor_values) {
    return {space.coords_from_values(anchor_values)};
  }
  double value(const FilipovicSpace& space, double t) const {
    return coords.dot(space.eval_vector(t));
  }
};

/// exp(<y, u_{T_hat - T}>)
double forward_price(const FilipovicSpace& space, const ForwardCurve& y, double T, double T_hat);

double black76_call(double F, double K, double T, double r, double sigma);
/// Root of black76_call(., sigma) = price on the no-arbitrage interval.
double implied_vol(double price, double F, double K, double T, double r);

/// Gamma with <Gamma vec(x), eval_vector(x_j)> = -1/2 e_j^T Lambda x Lambda^T e_j
/// for every anchor, where e_j = eval_vector(x_j). Cancels the Ito term of the
/// log-forward at anchor tenors.
Matrix risk_neutral_gamma(const FilipovicSpace& space, const Matrix& lambda);

/// Joint model on the curve space: A = truncated shift generator, g0 = 0 and
/// Gamma from risk_neutral_gamma.
JointModelSpec forward_curve_model(const FilipovicSpace& space, const Matrix& lambda,
                                   AdmissibleParams x_params);

struct PricingModel {
  JointModelSpec spec;
  FilipovicSpace space;
  double r = 0.0;
  Regime start;  // start of (Y, X); the invariant regime uses Y_0 = 0
};

enum class PricingMethod { kFourier, kMonteCarlo };
const char* to_string(PricingMethod m) noexcept;

struct PricingOptions {
  double alpha = 1.5;            // Carr-Madan damping
  int max_alpha_halvings = 4;
  double tol = 1e-9;             // Riccati tolerance
  double trunc_eps = 1e-10;      // frequency truncation threshold on the integrand
  double v_max = 4000.0;
  double panel_width = 2.0;
  std::size_t n_paths = 20000;   // Monte Carlo paths
  std::size_t n_outer = 4000;    // X_tau draws for conditional Monte Carlo
  std::size_t n_nested = 0;      // paths for the direct forward-start cross-check
  std::uint64_t seed = 1;
  JointSimOptions sim;
  int threads = 0;
};

struct PriceResult {
  double price = 0.0;  // E[(F - K)^+] under the pricing measure, undiscounted
  double se = 0.0;     // zero for Fourier
  PricingMethod method = PricingMethod::kFourier;
  double alpha = 0.0;  // damping actually used
  bool fallback = false;  // Fourier failed on every damping; Monte Carlo used
};

/// Characteristic data of log F(T, T_hat) on the Carr-Madan frequency grid:
/// per node the Riccati endpoint (Phi, psi1, psi2) for u1 = (alpha + 1 + iv) e.
class FourierEngine {
 public:
  FourierEngine(const PricingModel& model, double T, double T_hat, const PricingOptions& opt);

  double alpha() const noexcept { return alpha_; }
  std::size_t nodes() const noexcept { return v_.size(); }

  /// Undiscounted call price at log-strike k with X started at x, Y at y0.
  double call_point(const ConeElement& x, const Vector& y0, double k) const;
  std::vector<double> call_point(const ConeElement& x, const Vector& y0,
                                 const std::vector<double>& ks) const;
  /// Same in the invariant regime, Y_0 = 0.
  double call_stationary(double k) const;
  std::vector<double> call_stationary(const std::vector<double>& ks) const;

 private:
  void build(double alpha);
  std::vector<double> invert(const std::vector<std::complex<double>>& weights,
                             const std::vector<double>& ks) const;

  const PricingModel* model_;
  double T_, T_hat_;
  PricingOptions opt_;
  double alpha_ = 0.0;
  Vector e_;
  std::vector<double> v_, w_;
  std::vector<std::complex<double>> phi_, denom_;
  std::vector<CVector> psi1_, psi2_;
  mutable std::vector<std::complex<double>> stationary_;  // e^{-Phi} L(psi2), lazily filled
  mutable std::optional<StationaryLaw> law_;
};

/// E[(F(T, T_hat) - K)^+] for strike level K > 0.
PriceResult price_call_on_forward(const PricingModel& model, double T, double T_hat, double K,
                                  const Regime& regime, PricingMethod method,
                                  const PricingOptions& opt = {});
std::vector<PriceResult> price_call_on_forward(const PricingModel& model, double T, double T_hat,
                                               const std::vector<double>& K,
                                               const Regime& regime, PricingMethod method,
                                               const PricingOptions& opt = {});

struct ForwardStartResult {
  double price = 0.0;  // E[(F(tau+T, tau+T_hat) / F(tau, tau+T_hat) - e^k)^+], undiscounted
  double se = 0.0;
  double nested_price = std::numeric_limits<double>::quiet_NaN();
  double nested_se = std::numeric_limits<double>::quiet_NaN();
  /// ||e^{T A*} u_{T_hat - T} - u_{T_hat}||: the truncated shift's defect at the
  /// forward-start tenor. The nested check prices with the shifted evaluator.
  double shift_defect = 0.0;
};

/// Conditional Monte Carlo over X_tau with the Fourier price of
/// <Y^0_T, u_{T_hat - T}> started at X_tau; optional direct nested check.
std::vector<ForwardStartResult> price_forward_start(const PricingModel& model, double tau,
                                                    double T, double T_hat,
                                                    const std::vector<double>& log_strikes,
                                                    const PricingOptions& opt = {});
ForwardStartResult price_forward_start(const PricingModel& model, double tau, double T,
                                       double T_hat, double log_strike,
                                       const PricingOptions& opt = {});

/// Implied forward volatility from an undiscounted forward-start price:
/// C^BS(T, k + rT, sigma) = price with unit spot.
double implied_forward_vol(double price, double log_strike, double T, double r);

struct SmileRow {
  double tau = 0.0;  // +inf marks the invariant-regime limit
  double T = 0.0;
  double T_hat = 0.0;
  double K = 0.0;    // log-strike
  double price = 0.0;
  double implied_vol = 0.0;
  double se = 0.0;   // of implied_vol
};

struct SmileTable {
  std::vector<SmileRow> rows;
  std::vector<double> tau_grid;
  std::vector<double> log_strikes;

  const SmileRow& at(std::size_t tau_index, std::size_t k_index) const;
  const SmileRow& limit(std::size_t k_index) const;
  /// |sigma(tau_i, k) - sigma_tilde(k)|
  double discrepancy(std::size_t tau_index, std::size_t k_index) const;
  /// Discrepancy nonincreasing in tau up to z standard errors, for every strike.
  bool monotone(double z = 3.0) const;
};

SmileTable smile_convergence(const PricingModel& model, const std::vector<double>& tau_grid,
                             double T, double T_hat, const std::vector<double>& log_strikes,
                             const PricingOptions& opt = {});

}  // namespace affine
