#include "affine/covariance.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "affine/parallel.hpp"
#include "affine/quadrature.hpp"

namespace affine {

using cd = std::complex<double>;

Matrix psd_sqrt(const Matrix& x) {
  const Eigen::Index n = x.rows();
  if (n == 1) return Matrix::Constant(1, 1, std::sqrt(std::max(0.0, x(0, 0))));
  if (n == 2) {
    const double det = x(0, 0) * x(1, 1) - x(0, 1) * x(1, 0);
    const double tr = x(0, 0) + x(1, 1);
    if (det >= 0.0 && tr > 0.0) {
      const double s = std::sqrt(det);
      const double t = std::sqrt(tr + 2.0 * s);
      Matrix r = x;
      r(0, 0) += s;
      r(1, 1) += s;
      return r / t;
    }
    if (tr <= 0.0 && det >= 0.0) return Matrix::Zero(2, 2);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (x + x.transpose()));
  require(es.info() == Eigen::Success, ErrorCode::kEigenFailure, "eigensolver failed");
  const Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

JointModelSpec JointModelSpec::with_d(Matrix a, Vector g0, Matrix gamma, const Matrix& d,
                                      AdmissibleParams x_params) {
  require(d.rows() == d.cols(), ErrorCode::kDimensionMismatch, "D must be square");
  require(is_in_cone(SymElement(d)), ErrorCode::kNotInCone, "D must be positive semidefinite");
  JointModelSpec s;
  s.dim_h = static_cast<int>(d.rows());
  require(s.dim_h == x_params.dim(), ErrorCode::kDimensionMismatch,
          "D requires dim_h equal to the covariance dimension");
  s.A = std::move(a);
  s.g0 = std::move(g0);
  s.gamma = std::move(gamma);
  s.lambda = psd_sqrt(d);
  s.d = d;
  s.x_params = std::move(x_params);
  s.check();
  return s;
}

JointModelSpec JointModelSpec::with_loading(Matrix a, Vector g0, Matrix gamma, Matrix lambda,
                                            AdmissibleParams x_params) {
  JointModelSpec s;
  s.dim_h = static_cast<int>(a.rows());
  s.A = std::move(a);
  s.g0 = std::move(g0);
  s.gamma = std::move(gamma);
  s.lambda = std::move(lambda);
  s.x_params = std::move(x_params);
  s.check();
  return s;
}

bool JointModelSpec::has_affine_drift() const {
  return !(g0.isZero(0.0) && gamma.isZero(0.0));
}

void JointModelSpec::check() const {
  const int n = x_params.dim();
  require(dim_h >= 1, ErrorCode::kInvalidArgument, "dim_h must be positive");
  require(A.rows() == dim_h && A.cols() == dim_h, ErrorCode::kDimensionMismatch,
          "A must be dim_h x dim_h");
  require(g0.size() == dim_h, ErrorCode::kDimensionMismatch, "g0 must have dim_h entries");
  require(gamma.rows() == dim_h && gamma.cols() == sym_dim(n), ErrorCode::kDimensionMismatch,
          "Gamma must be dim_h x N");
  require(lambda.rows() == dim_h && lambda.cols() == n, ErrorCode::kDimensionMismatch,
          "loading must be dim_h x n");
  if (d) {
    require((lambda * lambda - *d).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + d->norm()),
            ErrorCode::kInvalidArgument, "D^{1/2} D^{1/2} differs from D");
  }
}

CVector ComplexSym::vec() const {
  return affine::vec(re).cast<cd>() + cd(0.0, 1.0) * affine::vec(im).cast<cd>();
}

ComplexSym ComplexSym::from_vec(const CVector& v) {
  return {unvec(Vector(v.real())), unvec(Vector(v.imag()))};
}

namespace {

CVector vec_square(const CVector& h) { return vec_raw(CMatrix(h * h.transpose())); }

bool is_real(const CVector& v) { return v.imag().isZero(0.0); }

struct JointRhs {
  const JointModelSpec& s;
  const CVector& u1;
  bool has_u1;
  CVector psi1_at(double t) const {
    if (!has_u1) return CVector::Zero(s.dim_h);
    const Matrix e = (t * s.A.transpose()).exp();
    return e.cast<cd>() * u1;
  }
  CVector operator()(double t, const CVector& y) const {
    const CompiledParams& c = s.x_params.compiled();
    const CVector psi2 = y.tail(c.big_n);
    CVector dy(c.big_n + 1);
    dy(0) = F_vec<cd>(c, psi2);
    dy.tail(c.big_n) = R_vec<cd>(c, psi2);
    if (has_u1) {
      const CVector p1 = psi1_at(t);
      dy(0) -= s.g0.cast<cd>().dot(p1);
      const CVector h = s.lambda.transpose().cast<cd>() * p1;
      dy.tail(c.big_n) -= s.gamma.transpose().cast<cd>() * p1 + 0.5 * vec_square(h);
    }
    return dy;
  }
};

}  // namespace

JointRiccatiPath joint_riccati(const JointModelSpec& spec, const CVector& u1, const CVector& u2,
                               double T, double tol, const std::vector<double>& output_times) {
  spec.check();
  const CompiledParams& c = spec.x_params.compiled();
  require(u1.size() == spec.dim_h, ErrorCode::kDimensionMismatch, "u1 must have dim_h entries");
  require(u2.size() == c.big_n, ErrorCode::kDimensionMismatch, "u2 must have N entries");
  require(T > 0.0, ErrorCode::kInvalidArgument, "T must be positive");
  JointRiccatiPath out;
  const bool has_u1 = !u1.isZero(0.0);
  if (!has_u1 && is_real(u2) && is_in_cone(unvec(Vector(u2.real())))) {
    // Real cone argument: the shared real Riccati path.
    const RiccatiSolution sol =
        solve_riccati(spec.x_params, ConeElement(unvec(Vector(u2.real()))), T, tol, output_times);
    out.times = sol.times;
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      out.Phi.emplace_back(sol.phi[i], 0.0);
      out.psi1.push_back(CVector::Zero(spec.dim_h));
      out.psi2.push_back(vec(sol.psi[i].sym()).cast<cd>());
    }
    return out;
  }
  CVector y0(c.big_n + 1);
  y0(0) = 0.0;
  y0.tail(c.big_n) = u2;
  OdeOptions o;
  o.rtol = tol;
  o.atol = tol;
  o.keep_all = false;
  const JointRhs rhs{spec, u1, has_u1};
  const auto guard = [&c](double, CVector& y) {
    check_domain(c, CVector(y.tail(c.big_n)));
    return StepVerdict::kAccept;
  };
  const auto tr = dopri5<cd>(rhs, y0, 0.0, T, output_times, o, guard);
  out.times = tr.t;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    out.Phi.push_back(tr.y[i](0));
    out.psi1.push_back(rhs.psi1_at(tr.t[i]));
    out.psi2.push_back(tr.y[i].tail(c.big_n));
  }
  return out;
}

std::complex<double> joint_transform(const JointModelSpec& spec, const Regime& regime,
                                     const CVector& u1, const CVector& u2, double t, double tol,
                                     const StationaryLaw* law) {
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  cd Phi = 0.0;
  CVector psi1 = u1, psi2 = u2;
  if (t > 0.0) {
    const JointRiccatiPath path = joint_riccati(spec, u1, u2, t, tol);
    Phi = path.Phi.back();
    psi1 = path.psi1.back();
    psi2 = path.psi2.back();
  }
  if (regime.stationary) {
    std::optional<StationaryLaw> own;
    if (!law) {
      own.emplace(spec.x_params, tol);
      law = &*own;
    }
    return std::exp(-Phi) * law->laplace_vec(psi2);
  }
  require(regime.x0.dim() == spec.n(), ErrorCode::kDimensionMismatch, "x0 has the wrong dimension");
  cd expo = -Phi - vec(regime.x0.sym()).cast<cd>().dot(psi2);
  if (regime.y0.size() > 0) {
    require(regime.y0.size() == spec.dim_h, ErrorCode::kDimensionMismatch,
            "y0 must have dim_h entries");
    expo += regime.y0.cast<cd>().dot(psi1);
  }
  return std::exp(expo);
}

std::complex<double> bns_transform(const JointModelSpec& spec, const CVector& u1,
                                   const CVector& u2, double t, bool stationary,
                                   const std::optional<ConeElement>& x0, const StationaryLaw* law) {
  spec.check();
  if (!spec.x_params.mu().empty() || spec.has_affine_drift()) {
    throw Error(ErrorCode::kNotBnsShaped, "BNS form needs mu empty and zero affine drift");
  }
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  require(stationary || x0, ErrorCode::kInvalidArgument, "point regime needs x0");
  const CompiledParams& c = spec.x_params.compiled();
  const Matrix badj = c.b_adj;
  const Matrix at = spec.A.transpose();
  const Matrix lt = spec.lambda.transpose();
  const bool has_u1 = !u1.isZero(0.0);
  const double scale = 1.0 + badj.norm() + spec.A.norm();
  const double width = std::min(0.5, 1.0 / scale);

  auto source = [&](double tau) -> CVector {
    const CVector h = lt.cast<cd>() * ((tau * at).exp().cast<cd>() * u1);
    return vec_square(h);
  };
  auto psi_at = [&](double s) -> CVector {
    CVector psi = (s * badj).exp().cast<cd>() * u2;
    if (has_u1 && s > 0.0) {
      const int panels = std::max(1, static_cast<int>(std::ceil(s / width)));
      const QuadratureRule q = gauss_legendre_panels(0.0, s, panels);
      for (std::size_t k = 0; k < q.size(); ++k) {
        const double tau = q.nodes[k];
        psi -= (0.5 * q.weights[k]) * ((s - tau) * badj).exp().cast<cd>() * source(tau);
      }
    }
    return psi;
  };

  cd expo = 0.0;
  if (t > 0.0) {
    const int panels = std::max(1, static_cast<int>(std::ceil(t / width)));
    const QuadratureRule q = gauss_legendre_panels(0.0, t, panels);
    for (std::size_t k = 0; k < q.size(); ++k) expo -= q.weights[k] * F_vec<cd>(c, psi_at(q.nodes[k]));
  }
  const CVector psi_t = psi_at(t);
  if (!stationary) {
    require(x0->dim() == spec.n(), ErrorCode::kDimensionMismatch, "x0 has the wrong dimension");
    return std::exp(expo - vec(x0->sym()).cast<cd>().dot(psi_t));
  }
  std::optional<StationaryLaw> own;
  if (!law) {
    own.emplace(spec.x_params);
    law = &*own;
  }
  // int_0^inf F(e^{sB*} psi(t)) ds on graded panels out to the tail horizon.
  const double horizon = std::max(1.0, law->horizon(psi_t.norm(), 1e-13));
  const QuadratureRule q = gauss_legendre_graded(horizon, width, 1.25);
  for (std::size_t k = 0; k < q.size(); ++k) {
    const CVector v = (q.nodes[k] * badj).exp().cast<cd>() * psi_t;
    expo -= q.weights[k] * F_vec<cd>(c, v);
  }
  return std::exp(expo);
}

JointPaths simulate_joint(const JointModelSpec& spec, const Regime& regime, const TimeGrid& grid,
                          std::uint64_t seed, std::size_t n_paths, const JointSimOptions& opt) {
  spec.check();
  require(!grid.empty() && grid.front() >= 0.0, ErrorCode::kInvalidArgument, "bad time grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    require(grid[i] > grid[i - 1], ErrorCode::kInvalidArgument, "time grid must increase");
  }
  require(opt.dt > 0.0, ErrorCode::kInvalidArgument, "dt must be positive");
  const int n = spec.n();
  const int dh = spec.dim_h;
  auto sim = make_simulator(spec.x_params, opt.x_dt_max);

  // Sub-steps per grid interval.
  std::vector<long> substeps;
  std::vector<double> hs;
  double prev = 0.0;
  for (double tg : grid) {
    const double span = tg - prev;
    const long k = span > 0.0 ? std::max(1L, static_cast<long>(std::ceil(span / opt.dt - 1e-12))) : 0;
    substeps.push_back(k);
    hs.push_back(k > 0 ? span / static_cast<double>(k) : 0.0);
    prev = tg;
  }
  std::vector<double> prep = hs;
  Vector x_start;
  double burn_in = 0.0;
  if (regime.stationary) {
    const StationaryLaw law(spec.x_params);
    burn_in = opt.burn_in > 0.0 ? opt.burn_in : 10.0 / law.delta();
    x_start = vec(cone_project(law.mean()).sym());
    prep.push_back(burn_in);
  } else {
    require(regime.x0.dim() == n, ErrorCode::kDimensionMismatch, "x0 has the wrong dimension");
    x_start = vec(regime.x0.sym());
  }
  sim->prepare(prep);

  struct StepMats {
    Matrix e, e_half;
  };
  std::vector<StepMats> mats;
  for (double h : hs) {
    if (h > 0.0) {
      mats.push_back({(h * spec.A).exp(), (0.5 * h * spec.A).exp()});
    } else {
      mats.push_back({Matrix::Identity(dh, dh), Matrix::Identity(dh, dh)});
    }
  }
  const Vector y_start = regime.y0.size() > 0 ? regime.y0 : Vector(Vector::Zero(dh));
  require(y_start.size() == dh, ErrorCode::kDimensionMismatch, "y0 must have dim_h entries");

  JointPaths out;
  out.times = grid;
  out.y.assign(n_paths, {});
  out.x.assign(n_paths, {});
  parallel_for(
      n_paths,
      [&](std::size_t p) {
        RandomStream rng(seed, p);
        Vector x = x_start;
        if (regime.stationary) sim->advance(x, burn_in, rng);
        Vector y = y_start;
        Vector z(n);
        auto& ys = out.y[p];
        auto& xs = out.x[p];
        ys.reserve(grid.size());
        xs.reserve(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
          const double h = hs[g];
          for (long k = 0; k < substeps[g]; ++k) {
            Vector x_new = x;
            sim->advance(x_new, h, rng);
            const Vector xbar = 0.5 * (x + x_new);
            for (int i = 0; i < n; ++i) z(i) = rng.normal();
            const Matrix root = psd_sqrt(unvec_raw(xbar));
            const Vector incr = h * (spec.g0 + spec.gamma * xbar) +
                                std::sqrt(h) * (spec.lambda * (root * z));
            y = mats[g].e * y + mats[g].e_half * incr;
            x = std::move(x_new);
          }
          ys.push_back(y);
          xs.push_back(x);
        }
      },
      opt.threads);
  return out;
}

}  // namespace affine
