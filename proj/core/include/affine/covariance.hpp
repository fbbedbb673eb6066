#pragma once

// Joint affine stochastic covariance model
//   dY = (A Y + g0 + Gamma(X)) dt + Lambda X^{1/2} dW,   X affine on the cone,
// with W independent of the jumps of X. With a PSD matrix D on an outer space
// of the same dimension as X, Lambda = D^{1/2} gives instantaneous covariance
// D^{1/2} X D^{1/2}.

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "affine/simulate.hpp"
#include "affine/stationary.hpp"

namespace affine {

struct JointModelSpec {
  int dim_h = 0;
  Matrix A;        // dim_h x dim_h, generator of S(t) = e^{tA}
  Vector g0;       // dim_h
  Matrix gamma;    // dim_h x N, acts on vec(x)
  Matrix lambda;   // dim_h x n noise loading
  std::optional<Matrix> d;  // set when lambda = D^{1/2}
  AdmissibleParams x_params;

  /// Lambda = D^{1/2} (symmetric square root); requires dim_h == n.
  static JointModelSpec with_d(Matrix a, Vector g0, Matrix gamma, const Matrix& d,
                               AdmissibleParams x_params);
  static JointModelSpec with_loading(Matrix a, Vector g0, Matrix gamma, Matrix lambda,
                                     AdmissibleParams x_params);

  int n() const noexcept { return x_params.dim(); }
  bool has_affine_drift() const;
  void check() const;
};

/// Complexified symmetric element.
struct ComplexSym {
  SymElement re;
  SymElement im;

  CVector vec() const;
  static ComplexSym from_vec(const CVector& v);
};

/// Start of the covariance process: a fixed state or the invariant law.
struct Regime {
  bool stationary = false;
  ConeElement x0;
  Vector y0;  // empty means 0

  static Regime point(ConeElement x0, Vector y0 = {}) { return {false, std::move(x0), std::move(y0)}; }
  static Regime invariant() { return {true, ConeElement(), Vector()}; }
};

struct JointRiccatiPath {
  std::vector<double> times;
  std::vector<std::complex<double>> Phi;
  std::vector<CVector> psi1;  // dim_h
  std::vector<CVector> psi2;  // vec coordinates
};

/// psi1 = e^{tA^T} u1; psi2' = R(psi2) - Gamma^T psi1 - 1/2 (Lambda^T psi1)^{(x)2} (bilinear);
/// Phi' = F(psi2) - <g0, psi1>. u1 = 0 with real u2 dispatches to solve_riccati.
JointRiccatiPath joint_riccati(const JointModelSpec& spec, const CVector& u1, const CVector& u2,
                               double T, double tol = kDefaultRiccatiTol,
                               const std::vector<double>& output_times = {});

/// E[exp(<Y_t, u1> - <X_t, u2>)]. The stationary regime uses Y_0 = 0 and
/// replaces e^{-<x, psi2>} by the invariant Laplace transform at psi2(t).
std::complex<double> joint_transform(const JointModelSpec& spec, const Regime& regime,
                                     const CVector& u1, const CVector& u2, double t,
                                     double tol = kDefaultRiccatiTol,
                                     const StationaryLaw* law = nullptr);

/// Closed form for mu empty and zero affine drift:
///   psi(t) = e^{tB*} u2 - 1/2 int_0^t e^{(t-s)B*} (Lambda^T S*(s) u1)^{(x)2} ds,
/// exponent -int_0^t F(psi(s)) ds and either -<x0, psi(t)> or
/// -int_0^inf F(e^{sB*} psi(t)) ds. Evaluated by Gauss-Legendre quadrature.
std::complex<double> bns_transform(const JointModelSpec& spec, const CVector& u1,
                                   const CVector& u2, double t, bool stationary,
                                   const std::optional<ConeElement>& x0 = std::nullopt,
                                   const StationaryLaw* law = nullptr);

struct JointPaths {
  std::vector<double> times;
  std::vector<std::vector<Vector>> y;  // [path][time], dim_h
  std::vector<std::vector<Vector>> x;  // [path][time], vec coordinates
};

struct JointSimOptions {
  double dt = 0.01;          // Y sub-step
  double x_dt_max = 0.05;    // thinning lattice for X
  double burn_in = 0.0;      // stationary start; 0 selects 10/delta
  int threads = 0;
};

/// Exponential-midpoint mild scheme for Y:
///   Y_{t+h} = e^{hA} Y_t + e^{hA/2} (h G(Xbar) + Lambda Xbar^{1/2} sqrt(h) Z),
/// Xbar the average of X over the sub-step endpoints.
JointPaths simulate_joint(const JointModelSpec& spec, const Regime& regime, const TimeGrid& grid,
                          std::uint64_t seed, std::size_t n_paths,
                          const JointSimOptions& opt = {});

/// Symmetric PSD square root with negative eigenvalues clipped.
Matrix psd_sqrt(const Matrix& x);

}  // namespace affine
