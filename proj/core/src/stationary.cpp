#include "affine/stationary.hpp"

#include <cmath>

namespace affine {

Matrix solve_lyapunov(const Matrix& l, const Matrix& c) {
  const Eigen::Index n = l.rows();
  require(l.cols() == n && c.rows() == n && c.cols() == n, ErrorCode::kDimensionMismatch,
          "Lyapunov operands must be square and conformant");
  const Matrix id = Matrix::Identity(n, n);
  // Column-major vec: vec(L X + X L^T) = (I (x) L + L (x) I) vec(X).
  Matrix k = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      k.block(j * n, i * n, n, n) += l(j, i) * id;
      if (i == j) k.block(j * n, i * n, n, n) += l;
    }
  }
  const Eigen::Map<const Vector> rhs(c.data(), n * n);
  Eigen::FullPivLU<Matrix> lu(k);
  require(lu.isInvertible(), ErrorCode::kSingularSolve, "Lyapunov operator is singular");
  const Vector x = lu.solve(Vector(-rhs));
  Matrix out = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (out + out.transpose());
}

namespace {

void require_subcritical(const EffectiveDrift& d) {
  if (!(spectral_bound(d.B_hat) < 0.0)) {
    throw Error(ErrorCode::kNotSubcritical, "effective drift is not subcritical");
  }
}

Vector mean_vec(const EffectiveDrift& d) {
  require_subcritical(d);
  const Matrix lt = d.B_hat.matrix().transpose();
  Eigen::FullPivLU<Matrix> lu(lt);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12)) throw Error(ErrorCode::kSingularSolve, "effective drift is ill-conditioned");
  return -lu.solve(vec(d.b_hat));
}

Matrix second_moment_matrix(const AdmissibleParams& p, const EffectiveDrift& d, const Vector& z) {
  const CompiledParams& c = p.compiled();
  Matrix src = Matrix::Zero(c.big_n, c.big_n);
  for (const auto& a : c.m) src += a.w * a.xi * a.xi.transpose();
  for (const auto& a : c.mu) {
    const double rate = std::max(0.0, a.mass.dot(z) / a.norm2);
    src += rate * a.xi * a.xi.transpose();
  }
  const Matrix q = solve_lyapunov(d.B_hat.matrix().transpose(), src);
  Matrix s = z * z.transpose() + q;
  return 0.5 * (s + s.transpose());
}

}  // namespace

StationaryLaw::StationaryLaw(AdmissibleParams params, double tol, double margin)
    : params_(std::move(params)), tol_(tol) {
  require(tol > 0.0, ErrorCode::kInvalidArgument, "tol must be positive");
  drift_ = effective_drift(params_);
  require_subcritical(drift_);
  cert_ = stability_constants(drift_.B_hat, margin);
  const Vector z = mean_vec(drift_);
  mean_ = unvec(z);
  second_ = SuperOperator(params_.dim(), second_moment_matrix(params_, drift_, z));
  growth_c_ = hs_norm(params_.b()) + params_.m().second_moment();
}

double StationaryLaw::horizon(double u_norm, double eps) const {
  GrowthEnvelope g;
  g.C = growth_c_;
  g.M = cert_.m;
  g.delta = cert_.delta;
  g.u_norm = u_norm;
  return g.horizon(eps);
}

double StationaryLaw::laplace_vec(const Vector& u) const {
  if (u.isZero(0.0)) return 1.0;
  const double T = horizon(u.norm(), tol_);
  const auto e = riccati_endpoint(params_, u, T, tol_);
  return std::exp(-e.phi);
}

std::complex<double> StationaryLaw::laplace_vec(const CVector& u) const {
  if (u.isZero(0.0)) return 1.0;
  const double T = horizon(u.norm(), tol_);
  const auto e = riccati_endpoint(params_, u, T, tol_);
  return std::exp(-e.phi);
}

double StationaryLaw::laplace(const SymElement& u) const {
  require(u.dim() == params_.dim(), ErrorCode::kDimensionMismatch,
          "argument has the wrong dimension");
  return laplace_vec(vec(u));
}

double laplace_invariant(const AdmissibleParams& p, const ConeElement& u, double tol) {
  return StationaryLaw(p, tol).laplace(u.sym());
}

SymElement mean_invariant(const AdmissibleParams& p) { return unvec(mean_vec(effective_drift(p))); }

SuperOperator second_moment_invariant(const AdmissibleParams& p, double tol) {
  require(tol > 0.0, ErrorCode::kInvalidArgument, "tol must be positive");
  const EffectiveDrift d = effective_drift(p);
  const Vector z = mean_vec(d);
  return SuperOperator(p.dim(), second_moment_matrix(p, d, z));
}

WassersteinConstants wasserstein_constants(const StationaryLaw& law) {
  const double m = law.M();
  const double delta = law.delta();
  const double mu_norm = hs_norm(law.params().mu().total_mass(law.params().dim()));
  return {2.0 * m, std::sqrt(2.0) * std::pow(m, 1.5) / std::sqrt(delta) * std::sqrt(mu_norm)};
}

double wasserstein_bound(const StationaryLaw& law, const ConeElement& x, double pexp, double t) {
  require(pexp >= 1.0 && pexp <= 2.0, ErrorCode::kInvalidArgument, "p must lie in [1,2]");
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  const WassersteinConstants k = wasserstein_constants(law);
  const double xn = hs_norm(x.sym());
  const double m2 = std::max(0.0, law.m2());
  const double mp = std::sqrt(m2);
  const double mp2 = std::pow(m2, 0.25);
  const double d = law.delta();
  return k.c1 * std::exp(-d * t) * (xn + mp) + k.c2 * std::exp(-0.5 * d * t) * (std::sqrt(xn) + mp2);
}

double invariance_residual(const StationaryLaw& law, const ConeElement& u, double t) {
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  const Vector uv = vec(u.sym());
  if (t == 0.0 || uv.isZero(0.0)) return 0.0;
  const auto e = riccati_endpoint(law.params(), uv, t, law.tol());
  return std::abs(std::exp(-e.phi) * law.laplace_vec(e.psi) - law.laplace_vec(uv));
}

double invariance_residual(const AdmissibleParams& p, const ConeElement& u, double t, double tol) {
  return invariance_residual(StationaryLaw(p, tol), u, t);
}

}  // namespace affine
