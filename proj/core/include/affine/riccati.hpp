#pragma once

#include <complex>
#include <vector>

#include "affine/ode.hpp"
#include "affine/params.hpp"

namespace affine {

inline constexpr double kDefaultRiccatiTol = 1e-9;

/// F(u) = <b,u> - sum_k w_k (e^{-<xi_k,u>} - 1 + <chi(xi_k),u>).
double F_eval(const AdmissibleParams& p, const SymElement& u);

/// R(u) = B*(u) - sum_k (e^{-<xi_k,u>} - 1 + <chi(xi_k),u>) M_k / ||xi_k||^2.
SymElement R_eval(const AdmissibleParams& p, const SymElement& u);

namespace detail {

inline double expm1_any(double z) { return std::expm1(z); }

inline std::complex<double> expm1_any(std::complex<double> z) {
  if (std::abs(z) < 1e-3) {
    return z * (1.0 + z * (0.5 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120)))));
  }
  return std::exp(z) - 1.0;
}

}  // namespace detail

/// Same maps on vec coordinates; the complex versions are the analytic
/// continuation of the finite sums (bilinear pairings, no conjugation).
template <class S>
S F_vec(const CompiledParams& c, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u) {
  S acc = c.b.template cast<S>().dot(u);
  for (const auto& a : c.m) {
    const S xu = a.xi.template cast<S>().dot(u);
    const S cu = a.chi.template cast<S>().dot(u);
    acc -= a.w * (detail::expm1_any(-xu) + cu);
  }
  return acc;
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> R_vec(const CompiledParams& c,
                                          const Eigen::Matrix<S, Eigen::Dynamic, 1>& u) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> r = c.b_adj.template cast<S>() * u;
  for (const auto& a : c.mu) {
    const S xu = a.xi.template cast<S>().dot(u);
    const S cu = a.chi.template cast<S>().dot(u);
    r -= ((detail::expm1_any(-xu) + cu) / a.norm2) * a.mass.template cast<S>();
  }
  return r;
}

/// The augmented Riccati system y = (phi, vec psi): phi' = F(psi), psi' = R(psi).
struct RiccatiSolution {
  ConeElement u0;
  std::vector<double> times;
  std::vector<ConeElement> psi;
  std::vector<double> phi;
  double tol = kDefaultRiccatiTol;
  OdeTrajectory<double> trajectory;  // every accepted step, for dense output

  /// Cubic Hermite dense output.
  SymElement psi_at(double t) const;
  double phi_at(double t) const;
};

/// Adaptive DOPRI5 solve of the generalized Riccati equations on [0, T].
/// `output_times` are hit exactly; the stored grid is every accepted step.
RiccatiSolution solve_riccati(const AdmissibleParams& p, const ConeElement& u0, double T,
                              double tol = kDefaultRiccatiTol,
                              const std::vector<double>& output_times = {});

/// (phi(T), vec psi(T)) only. Used by the stationary integrals.
struct RiccatiEndpoint {
  double phi = 0.0;
  Vector psi;
};
RiccatiEndpoint riccati_endpoint(const AdmissibleParams& p, const Vector& u0, double T,
                                 double tol);

/// Complex endpoint (same ODE continued to complex arguments, no cone guard).
struct ComplexRiccatiEndpoint {
  std::complex<double> phi;
  CVector psi;
};
ComplexRiccatiEndpoint riccati_endpoint(const AdmissibleParams& p, const CVector& u0, double T,
                                        double tol);

/// Throws kDomainBlowup when Re<xi_k, psi> < -50 for some atom or psi is not finite.
void check_domain(const CompiledParams& c, const CVector& psi);

/// e^{-phi(t,u) - <x, psi(t,u)>}
double laplace_transition(const AdmissibleParams& p, const ConeElement& x, const ConeElement& u,
                          double t, double tol = kDefaultRiccatiTol);

struct GrowthEnvelope {
  double C = 0.0;
  double M = 1.0;
  double delta = 0.0;
  double u_norm = 0.0;

  /// C M^2 e^{-delta t} (||u|| + ||u||^2)
  double envelope(double t) const;
  /// Upper bound on int_T^inf |F(psi(s,u))| ds.
  double tail_bound(double T) const;
  /// Smallest T with tail_bound(T) <= eps (0 when u = 0).
  double horizon(double eps) const;
};

/// C = ||b|| + sum_k w_k ||xi_k||^2 with (M, delta) certified for the effective drift.
GrowthEnvelope growth_envelope(const AdmissibleParams& p, double u_norm, double margin = 0.01);
GrowthEnvelope growth_envelope(const AdmissibleParams& p, const SymElement& u,
                               double margin = 0.01);

}  // namespace affine
