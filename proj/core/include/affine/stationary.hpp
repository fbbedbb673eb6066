#pragma once

#include <complex>

#include "affine/riccati.hpp"

namespace affine {

/// Invariant law of a subcritical parameter set: moments, stability
/// certificate and the Laplace transform L(u) = exp(-int_0^inf F(psi(s,u)) ds).
class StationaryLaw {
 public:
  StationaryLaw() = default;
  StationaryLaw(AdmissibleParams params, double tol = kDefaultRiccatiTol, double margin = 0.01);

  const AdmissibleParams& params() const noexcept { return params_; }
  const StabilityCertificate& certificate() const noexcept { return cert_; }
  double M() const noexcept { return cert_.m; }
  double delta() const noexcept { return cert_.delta; }
  double tol() const noexcept { return tol_; }
  const EffectiveDrift& drift() const noexcept { return drift_; }
  const SymElement& mean() const noexcept { return mean_; }
  const SuperOperator& second_moment() const noexcept { return second_; }
  /// int ||y||^2 pi(dy) = trace of the second-moment operator.
  double m2() const noexcept { return second_.matrix().trace(); }
  /// C = ||b|| + sum_k w_k ||xi_k||^2, the growth constant of F.
  double growth_constant() const noexcept { return growth_c_; }

  /// Integration horizon T* for an argument of norm u_norm at tolerance eps.
  double horizon(double u_norm, double eps) const;

  double laplace(const SymElement& u) const;
  double laplace_vec(const Vector& u) const;
  /// Analytic continuation to complex arguments (vec coordinates).
  std::complex<double> laplace_vec(const CVector& u) const;

 private:
  AdmissibleParams params_;
  StabilityCertificate cert_;
  EffectiveDrift drift_;
  SymElement mean_;
  SuperOperator second_;
  double growth_c_ = 0.0;
  double tol_ = kDefaultRiccatiTol;
};

/// exp(-int_0^{T*} F(psi(s,u)) ds) with T* from the growth envelope.
double laplace_invariant(const AdmissibleParams& p, const ConeElement& u,
                         double tol = kDefaultRiccatiTol);

/// z = -(B_hat*)^{-1} b_hat, the solution of int_0^inf e^{s B_hat*} b_hat ds.
SymElement mean_invariant(const AdmissibleParams& p);

/// int y (x) y pi(dy) in vec coordinates: z z^T + Q with
/// B_hat* Q + Q B_hat = -sum_k c_k vec(xi_k) vec(xi_k)^T.
SuperOperator second_moment_invariant(const AdmissibleParams& p, double tol = kDefaultRiccatiTol);

/// C1 e^{-delta t}(||x|| + m_p^{1/p}) + C2 e^{-delta t/2}(||x||^{1/2} + m_{p/2}^{1/p})
/// with Jensen bounds m_p^{1/p} <= m2^{1/2} and m_{p/2}^{1/p} <= m2^{1/4}.
double wasserstein_bound(const StationaryLaw& law, const ConeElement& x, double pexp, double t);

struct WassersteinConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};
WassersteinConstants wasserstein_constants(const StationaryLaw& law);

/// |e^{-phi(t,u)} L(psi(t,u)) - L(u)|
double invariance_residual(const AdmissibleParams& p, const ConeElement& u, double t,
                           double tol = kDefaultRiccatiTol);
double invariance_residual(const StationaryLaw& law, const ConeElement& u, double t);

/// Solves L X + X L^T = -C for square L with spectrum in the open left half-plane.
Matrix solve_lyapunov(const Matrix& l, const Matrix& c);

}  // namespace affine
