#include "affine/riccati.hpp"

#include <cmath>

namespace affine {

double F_eval(const AdmissibleParams& p, const SymElement& u) {
  require(u.dim() == p.dim(), ErrorCode::kDimensionMismatch, "argument has the wrong dimension");
  return F_vec<double>(p.compiled(), vec(u));
}

SymElement R_eval(const AdmissibleParams& p, const SymElement& u) {
  require(u.dim() == p.dim(), ErrorCode::kDimensionMismatch, "argument has the wrong dimension");
  return unvec(R_vec<double>(p.compiled(), vec(u)));
}

void check_domain(const CompiledParams& c, const CVector& psi) {
  for (const auto& a : c.m) {
    if (a.xi.cast<std::complex<double>>().dot(psi).real() < -50.0) {
      throw Error(ErrorCode::kDomainBlowup, "transform left its convergence region");
    }
  }
  for (const auto& a : c.mu) {
    if (a.xi.cast<std::complex<double>>().dot(psi).real() < -50.0) {
      throw Error(ErrorCode::kDomainBlowup, "transform left its convergence region");
    }
  }
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    if (!std::isfinite(psi(i).real()) || !std::isfinite(psi(i).imag())) {
      throw Error(ErrorCode::kDomainBlowup, "non-finite Riccati state");
    }
  }
}

namespace {

struct RealRhs {
  const CompiledParams& c;
  Vector operator()(double, const Vector& y) const {
    const int big_n = c.big_n;
    const Vector psi = y.tail(big_n);
    Vector dy(big_n + 1);
    dy(0) = F_vec<double>(c, psi);
    dy.tail(big_n) = R_vec<double>(c, psi);
    return dy;
  }
};

struct ComplexRhs {
  const CompiledParams& c;
  CVector operator()(double, const CVector& y) const {
    const int big_n = c.big_n;
    const CVector psi = y.tail(big_n);
    CVector dy(big_n + 1);
    dy(0) = F_vec<std::complex<double>>(c, psi);
    dy.tail(big_n) = R_vec<std::complex<double>>(c, psi);
    return dy;
  }
};

// Cone safeguard: project tiny negative eigenvalues, reject larger violations.
struct ConeGuard {
  double tol;
  bool active = true;
  StepVerdict operator()(double, Vector& y) const {
    if (!active) return StepVerdict::kAccept;
    const int big_n = static_cast<int>(y.size()) - 1;
    const Matrix m = unvec_raw(y.tail(big_n));
    const double lam = min_eigenvalue(SymElement(m));
    if (lam >= 0.0) return StepVerdict::kAccept;
    if (lam <= -10.0 * tol) return StepVerdict::kReject;
    y.tail(big_n) = vec(cone_project(SymElement(m)).sym());
    return StepVerdict::kModified;
  }
};

struct BlowupGuard {
  const CompiledParams& c;
  StepVerdict operator()(double, CVector& y) const {
    const int big_n = c.big_n;
    check_domain(c, CVector(y.tail(big_n)));
    return StepVerdict::kAccept;
  }
};

OdeOptions riccati_options(double tol, bool keep_all) {
  OdeOptions o;
  o.rtol = tol;
  o.atol = tol;
  o.keep_all = keep_all;
  return o;
}

}  // namespace

SymElement RiccatiSolution::psi_at(double t) const {
  const Vector y = trajectory.at(t);
  return unvec(Vector(y.tail(y.size() - 1)));
}

double RiccatiSolution::phi_at(double t) const { return trajectory.at(t)(0); }

RiccatiSolution solve_riccati(const AdmissibleParams& p, const ConeElement& u0, double T,
                              double tol, const std::vector<double>& output_times) {
  p.require_validated();
  require(T > 0.0, ErrorCode::kInvalidArgument, "T must be positive");
  require(tol > 0.0, ErrorCode::kInvalidArgument, "tol must be positive");
  require(u0.dim() == p.dim(), ErrorCode::kDimensionMismatch, "u0 has the wrong dimension");
  const CompiledParams& c = p.compiled();
  Vector y0(c.big_n + 1);
  y0(0) = 0.0;
  y0.tail(c.big_n) = vec(u0.sym());
  RiccatiSolution sol;
  sol.u0 = u0;
  sol.tol = tol;
  sol.trajectory = dopri5<double>(RealRhs{c}, y0, 0.0, T, output_times,
                                  riccati_options(tol, true), ConeGuard{tol});
  const auto& tr = sol.trajectory;
  sol.times = tr.t;
  sol.psi.reserve(tr.t.size());
  sol.phi.reserve(tr.t.size());
  for (const auto& y : tr.y) {
    sol.phi.push_back(y(0));
    const SymElement s = unvec(Vector(y.tail(c.big_n)));
    sol.psi.push_back(is_in_cone(s) ? ConeElement(s) : cone_project(s));
  }
  return sol;
}

RiccatiEndpoint riccati_endpoint(const AdmissibleParams& p, const Vector& u0, double T,
                                 double tol) {
  const CompiledParams& c = p.compiled();
  require(u0.size() == c.big_n, ErrorCode::kDimensionMismatch, "u0 has the wrong dimension");
  if (T <= 0.0 || u0.isZero(0.0)) return {0.0, u0};
  Vector y0(c.big_n + 1);
  y0(0) = 0.0;
  y0.tail(c.big_n) = u0;
  // Arguments off the cone (finite-difference probes) are integrated unguarded.
  const bool on_cone = is_in_cone(unvec(u0), 0.0);
  const auto tr = dopri5<double>(RealRhs{c}, y0, 0.0, T, {}, riccati_options(tol, false),
                                 ConeGuard{tol, on_cone});
  const Vector& y = tr.y.back();
  return {y(0), y.tail(c.big_n)};
}

ComplexRiccatiEndpoint riccati_endpoint(const AdmissibleParams& p, const CVector& u0, double T,
                                        double tol) {
  const CompiledParams& c = p.compiled();
  require(u0.size() == c.big_n, ErrorCode::kDimensionMismatch, "u0 has the wrong dimension");
  if (T <= 0.0 || u0.isZero(0.0)) return {0.0, u0};
  CVector y0(c.big_n + 1);
  y0(0) = 0.0;
  y0.tail(c.big_n) = u0;
  const auto tr = dopri5<std::complex<double>>(ComplexRhs{c}, y0, 0.0, T, {},
                                               riccati_options(tol, false), BlowupGuard{c});
  const CVector& y = tr.y.back();
  return {y(0), y.tail(c.big_n)};
}

double laplace_transition(const AdmissibleParams& p, const ConeElement& x, const ConeElement& u,
                          double t, double tol) {
  p.require_validated();
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  require(x.dim() == p.dim() && u.dim() == p.dim(), ErrorCode::kDimensionMismatch,
          "argument has the wrong dimension");
  const Vector xv = vec(x.sym());
  const auto e = riccati_endpoint(p, vec(u.sym()), t, tol);
  return std::exp(-e.phi - xv.dot(e.psi));
}

double GrowthEnvelope::envelope(double t) const {
  return C * M * M * std::exp(-delta * t) * (u_norm + u_norm * u_norm);
}

double GrowthEnvelope::tail_bound(double T) const { return envelope(T) / delta; }

double GrowthEnvelope::horizon(double eps) const {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  const double a = tail_bound(0.0);
  if (!(a > eps)) return 0.0;
  return std::log(a / eps) / delta;
}

GrowthEnvelope growth_envelope(const AdmissibleParams& p, double u_norm, double margin) {
  GrowthEnvelope g;
  g.C = hs_norm(p.b()) + p.m().second_moment();
  const StabilityCertificate cert = stability_constants(effective_drift(p).B_hat, margin);
  g.M = cert.m;
  g.delta = cert.delta;
  g.u_norm = u_norm;
  return g;
}

GrowthEnvelope growth_envelope(const AdmissibleParams& p, const SymElement& u, double margin) {
  require(u.dim() == p.dim(), ErrorCode::kDimensionMismatch, "argument has the wrong dimension");
  return growth_envelope(p, hs_norm(u), margin);
}

}  // namespace affine
