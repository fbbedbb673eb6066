#include "affine/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "affine/rng.hpp"

namespace affine {

double AtomicMeasure::second_moment() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.w * trace_inner(a.xi, a.xi);
  return s;
}

SymElement OperatorMeasure::total_mass(int n) const {
  SymElement s(n);
  for (const auto& a : atoms) s += a.mass.sym();
  return s;
}

bool ValidationReport::all_pass() const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [](const ConditionVerdict& c) { return c.pass; });
}

AdmissibleParams::AdmissibleParams(SymElement b, SuperOperator big_b, AtomicMeasure m,
                                   OperatorMeasure mu)
    : b_(std::move(b)), big_b_(std::move(big_b)), m_(std::move(m)), mu_(std::move(mu)) {
  const int n = b_.dim();
  require(big_b_.dim() == n, ErrorCode::kDimensionMismatch, "B has the wrong dimension");
  for (const auto& a : m_.atoms) {
    require(a.xi.dim() == n, ErrorCode::kDimensionMismatch, "m atom has the wrong dimension");
    require(a.w > 0.0 && std::isfinite(a.w), ErrorCode::kInvalidArgument,
            "m weights must be positive");
    require(hs_norm(a.xi) > 0.0, ErrorCode::kInvalidArgument, "m sites must be nonzero");
  }
  for (const auto& a : mu_.atoms) {
    require(a.xi.dim() == n && a.mass.dim() == n, ErrorCode::kDimensionMismatch,
            "mu atom has the wrong dimension");
    require(hs_norm(a.xi) > 0.0, ErrorCode::kInvalidArgument, "mu sites must be nonzero");
  }
  compile();
}

AdmissibleParams AdmissibleParams::ou(const Matrix& g, SymElement b, AtomicMeasure m,
                                      OperatorMeasure mu) {
  AdmissibleParams p(std::move(b), lyapunov_superop(g), std::move(m), std::move(mu));
  p.g_ = g;
  return p;
}

void AdmissibleParams::compile() {
  CompiledParams& c = compiled_;
  c.n = dim();
  c.big_n = sym_dim(c.n);
  c.b = vec(b_);
  c.b_op = big_b_.matrix();
  c.b_adj = big_b_.matrix().transpose();
  c.m.clear();
  c.mu.clear();
  for (const auto& a : m_.atoms) {
    const Vector xi = vec(a.xi);
    const bool small = is_small_jump(a.xi);
    c.m.push_back({a.w, xi, small ? xi : Vector(Vector::Zero(c.big_n)), xi.squaredNorm()});
  }
  for (const auto& a : mu_.atoms) {
    const Vector xi = vec(a.xi);
    const bool small = is_small_jump(a.xi);
    c.mu.push_back(
        {vec(a.mass), xi, small ? xi : Vector(Vector::Zero(c.big_n)), xi.squaredNorm()});
  }
}

const ValidationReport& AdmissibleParams::validate(int n_probe, double tol, std::uint64_t seed) {
  report_ = affine::validate(*this, n_probe, tol, seed);
  validated_ = report_.all_pass();
  return report_;
}

void AdmissibleParams::require_validated() const {
  if (!validated_) throw Error(ErrorCode::kNotValidated, "parameter set has not passed validation");
}

SymElement small_jump_compensator(const AtomicMeasure& m, int n) {
  SymElement s(n);
  for (const auto& a : m.atoms) {
    if (is_small_jump(a.xi)) s += a.w * a.xi.sym();
  }
  return s;
}

namespace {

Vector random_unit(RandomStream& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v / v.norm();
}

}  // namespace

ValidationReport validate(const AdmissibleParams& p, int n_probe, double tol, std::uint64_t seed) {
  require(n_probe >= 1, ErrorCode::kInvalidArgument, "n_probe must be at least 1");
  require(tol >= 0.0, ErrorCode::kInvalidArgument, "tol must be nonnegative");
  const int n = p.dim();
  ValidationReport rep;

  rep.conditions.push_back({"(i)(a) m has finite second moment", true, true, 0.0,
                            "finite atomic measure"});
  rep.conditions.push_back({"(i)(b) small-jump compensator I_m exists", true, true, 0.0,
                            "finite atomic measure"});

  {
    const SymElement drift = p.b() - small_jump_compensator(p.m(), n);
    const double lam = min_eigenvalue(drift);
    ConditionVerdict v{"(ii) b - I_m in cone", lam >= -tol, false, std::min(lam, 0.0), ""};
    std::ostringstream os;
    os << "min eigenvalue " << lam;
    v.detail = os.str();
    rep.conditions.push_back(v);
  }

  rep.conditions.push_back({"(iii) mu is a positive operator-valued measure", true, true, 0.0,
                            "atomic masses checked at construction"});

  {
    ConditionVerdict v{"(iv) quasi-monotonicity on orthogonal pairs", true, false, 0.0, ""};
    if (n == 1) {
      v.automatic = true;
      v.detail = "no orthogonal pairs in dimension 1";
    } else {
      const CompiledParams& c = p.compiled();
      RandomStream rng(seed, 0x1d1d);
      double worst = 0.0;
      int failures = 0;
      for (int k = 0; k < n_probe; ++k) {
        const Vector a = random_unit(rng, n);
        Vector w = random_unit(rng, n);
        w -= a.dot(w) * a;
        if (w.norm() < 1e-8) {
          --k;
          continue;
        }
        w /= w.norm();
        const Vector u = vec_raw(Matrix(a * a.transpose()));
        const Vector x = vec_raw(Matrix(w * w.transpose()));
        double val = (c.b_adj * u).dot(x);
        for (const auto& at : c.mu) val -= at.chi.dot(u) * at.mass.dot(x) / at.norm2;
        worst = std::min(worst, val);
        if (val < -tol) ++failures;
      }
      v.pass = failures == 0;
      v.worst = worst;
      std::ostringstream os;
      os << failures << " of " << n_probe << " probe pairs violate; worst " << worst;
      v.detail = os.str();
    }
    rep.conditions.push_back(v);
  }
  return rep;
}

EffectiveDrift effective_drift(const AdmissibleParams& p) {
  const CompiledParams& c = p.compiled();
  Vector bh = c.b;
  for (const auto& a : c.m) {
    if (a.chi.isZero(0.0)) bh += a.w * a.xi;
  }
  Matrix bm = c.b_adj;
  for (const auto& a : c.mu) {
    if (a.chi.isZero(0.0)) bm += a.mass * a.xi.transpose() / a.norm2;
  }
  return {unvec(bh), SuperOperator(c.n, std::move(bm))};
}

std::vector<JumpRate> jump_rates(const AdmissibleParams& p, const ConeElement& x) {
  require(x.dim() == p.dim(), ErrorCode::kDimensionMismatch, "state has the wrong dimension");
  const CompiledParams& c = p.compiled();
  const Vector xv = vec(x);
  std::vector<JumpRate> out;
  out.reserve(c.m.size() + c.mu.size());
  int idx = 0;
  for (std::size_t k = 0; k < c.m.size(); ++k, ++idx) {
    out.push_back({c.m[k].w, idx, p.m().atoms[k].xi.sym()});
  }
  for (std::size_t k = 0; k < c.mu.size(); ++k, ++idx) {
    double r = c.mu[k].mass.dot(xv) / c.mu[k].norm2;
    if (r < 0.0) r = 0.0;
    out.push_back({r, idx, p.mu().atoms[k].xi.sym()});
  }
  return out;
}

}  // namespace affine
