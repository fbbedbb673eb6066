#include "affine/cone.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace affine {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNotInCone: return "NotInCone";
    case ErrorCode::kEigenFailure: return "EigenFailure";
    case ErrorCode::kNotSubcritical: return "NotSubcritical";
    case ErrorCode::kNotValidated: return "NotValidated";
    case ErrorCode::kDriftConditionViolated: return "DriftConditionViolated";
    case ErrorCode::kStepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::kDomainBlowup: return "DomainBlowup";
    case ErrorCode::kMajorantOverflow: return "MajorantOverflow";
    case ErrorCode::kSingularSolve: return "SingularSolve";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kSizeCapExceeded: return "SizeCapExceeded";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kPriceOutOfBounds: return "PriceOutOfBounds";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kNotBnsShaped: return "NotBnsShaped";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNotSymmetric:
    case ErrorCode::kNotInCone:
    case ErrorCode::kNotSubcritical:
    case ErrorCode::kNotValidated:
    case ErrorCode::kDriftConditionViolated:
    case ErrorCode::kSizeMismatch:
    case ErrorCode::kSizeCapExceeded:
    case ErrorCode::kGridMismatch:
    case ErrorCode::kNotBnsShaped:
    case ErrorCode::kConfig:
    case ErrorCode::kPriceOutOfBounds:
      return true;
    default:
      return false;
  }
}

int rank_from_sym_dim(int big_n) {
  const int n = static_cast<int>(std::lround((std::sqrt(8.0 * big_n + 1.0) - 1.0) / 2.0));
  require(n >= 0 && sym_dim(n) == big_n, ErrorCode::kDimensionMismatch,
          "vector length is not n(n+1)/2");
  return n;
}

SymElement::SymElement(int n) : m_(Matrix::Zero(n, n)) {
  require(n >= 1, ErrorCode::kInvalidArgument, "dimension must be positive");
}

SymElement::SymElement(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, ErrorCode::kDimensionMismatch,
          "matrix must be square and non-empty");
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * scale, ErrorCode::kNotSymmetric, "matrix is not symmetric");
  m_ = 0.5 * (m + m.transpose());
}

SymElement SymElement::identity(int n) {
  require(n >= 1, ErrorCode::kInvalidArgument, "dimension must be positive");
  return SymElement(Matrix(Matrix::Identity(n, n)));
}

SymElement SymElement::outer(const Vector& v) { return SymElement(Matrix(v * v.transpose())); }

SymElement& SymElement::operator+=(const SymElement& o) {
  require(dim() == o.dim(), ErrorCode::kDimensionMismatch, "dimension mismatch");
  m_ += o.m_;
  return *this;
}

SymElement& SymElement::operator-=(const SymElement& o) {
  require(dim() == o.dim(), ErrorCode::kDimensionMismatch, "dimension mismatch");
  m_ -= o.m_;
  return *this;
}

SymElement& SymElement::operator*=(double s) {
  m_ *= s;
  return *this;
}

ConeElement::ConeElement(SymElement x, double tol) : inner_(std::move(x)) {
  require(is_in_cone(inner_, tol), ErrorCode::kNotInCone, "element is not positive semidefinite");
}

double trace_inner(const SymElement& x, const SymElement& y) {
  require(x.dim() == y.dim(), ErrorCode::kDimensionMismatch, "trace_inner dimension mismatch");
  return x.matrix().cwiseProduct(y.matrix()).sum();
}

double hs_norm(const SymElement& x) { return x.matrix().norm(); }

double min_eigenvalue(const SymElement& x) {
  const int n = x.dim();
  if (n == 1) return x(0, 0);
  if (n == 2) {
    const double a = x(0, 0), d = x(1, 1), c = x(0, 1);
    const double mid = 0.5 * (a + d);
    const double rad = std::hypot(0.5 * (a - d), c);
    return mid - rad;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(x.matrix(), Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, ErrorCode::kEigenFailure, "eigensolver failed");
  return es.eigenvalues()(0);
}

bool is_in_cone(const SymElement& x, double tol) { return min_eigenvalue(x) >= -tol; }

ConeElement cone_project(const SymElement& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x.matrix());
  require(es.info() == Eigen::Success, ErrorCode::kEigenFailure, "eigensolver failed");
  if (es.eigenvalues()(0) >= 0.0) return ConeElement(x, 0.0);
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  const Matrix& v = es.eigenvectors();
  Matrix r = v * lam.asDiagonal() * v.transpose();
  r = 0.5 * (r + r.transpose());
  return ConeElement(SymElement(r), kDefaultPsdTol);
}

Vector vec(const SymElement& x) { return vec_raw(x.matrix()); }

SymElement unvec(const Vector& v) { return SymElement(Matrix(unvec_raw(v))); }

SuperOperator::SuperOperator(int n) : n_(n), m_(Matrix::Zero(sym_dim(n), sym_dim(n))) {
  require(n >= 1, ErrorCode::kInvalidArgument, "dimension must be positive");
}

SuperOperator::SuperOperator(int n, Matrix matrix) : n_(n), m_(std::move(matrix)) {
  require(n >= 1 && m_.rows() == sym_dim(n) && m_.cols() == sym_dim(n),
          ErrorCode::kDimensionMismatch, "super-operator matrix must be N x N");
}

SuperOperator SuperOperator::identity(int n) {
  return SuperOperator(n, Matrix::Identity(sym_dim(n), sym_dim(n)));
}

SymElement SuperOperator::apply(const SymElement& x) const {
  require(x.dim() == n_, ErrorCode::kDimensionMismatch, "super-operator dimension mismatch");
  return SymElement(Matrix(unvec_raw(Vector(m_ * vec(x)))));
}

double SuperOperator::norm() const {
  Eigen::JacobiSVD<Matrix> svd(m_);
  return svd.singularValues()(0);
}

SuperOperator& SuperOperator::operator+=(const SuperOperator& o) {
  require(n_ == o.n_, ErrorCode::kDimensionMismatch, "dimension mismatch");
  m_ += o.m_;
  return *this;
}

SuperOperator& SuperOperator::operator*=(double s) {
  m_ *= s;
  return *this;
}

SuperOperator operator*(const SuperOperator& a, const SuperOperator& b) {
  require(a.dim() == b.dim(), ErrorCode::kDimensionMismatch, "dimension mismatch");
  return SuperOperator(a.dim(), a.matrix() * b.matrix());
}

SuperOperator tensor_square(const SymElement& x) {
  const Vector v = vec(x);
  return SuperOperator(x.dim(), v * v.transpose());
}

SuperOperator lyapunov_superop(const Matrix& g) {
  require(g.rows() == g.cols() && g.rows() >= 1, ErrorCode::kDimensionMismatch,
          "G must be square");
  const int n = static_cast<int>(g.rows());
  const int big_n = sym_dim(n);
  Matrix m(big_n, big_n);
  // Column k is vec of the image of the k-th orthonormal basis element.
  int k = 0;
  const double inv_r2 = 0.7071067811865476;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) {
      Matrix e = Matrix::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = inv_r2;
        e(j, i) = inv_r2;
      }
      const Matrix img = g * e + e * g.transpose();
      m.col(k) = vec_raw(img);
    }
  }
  return SuperOperator(n, std::move(m));
}

SymElement superop_exp_apply(const SuperOperator& a, double t, const SymElement& x) {
  require(t >= 0.0, ErrorCode::kInvalidArgument, "t must be nonnegative");
  require(x.dim() == a.dim(), ErrorCode::kDimensionMismatch, "dimension mismatch");
  if (t == 0.0) return x;
  const Matrix e = (t * a.matrix()).exp();
  return SymElement(Matrix(unvec_raw(Vector(e * vec(x)))));
}

double spectral_bound(const SuperOperator& a) {
  Eigen::EigenSolver<Matrix> es(a.matrix(), false);
  require(es.info() == Eigen::Success, ErrorCode::kEigenFailure, "eigensolver failed");
  return es.eigenvalues().real().maxCoeff();
}

double exp_norm(const SuperOperator& a, double t) {
  const Matrix e = (t * a.matrix()).exp();
  Eigen::JacobiSVD<Matrix> svd(e);
  return svd.singularValues()(0);
}

StabilityCertificate stability_constants(const SuperOperator& a, double margin, int grid_points) {
  require(margin >= 0.0 && margin < 1.0, ErrorCode::kInvalidArgument, "margin must be in [0,1)");
  require(grid_points >= 2, ErrorCode::kInvalidArgument, "grid needs at least two points");
  const double s = spectral_bound(a);
  if (!(s < 0.0)) throw Error(ErrorCode::kNotSubcritical, "spectral bound is not negative");
  StabilityCertificate c;
  c.delta = -s * (1.0 - margin);
  c.horizon = 20.0 / c.delta;
  c.grid_points = grid_points;
  // Geometric grid from horizon*1e-4 to horizon, plus t = 0 (where the ratio is 1).
  const double t_min = c.horizon * 1e-4;
  const double ratio = std::pow(c.horizon / t_min, 1.0 / (grid_points - 2));
  double best = 1.0;
  double t = t_min;
  for (int i = 1; i < grid_points; ++i, t *= ratio) {
    best = std::max(best, exp_norm(a, t) * std::exp(c.delta * t));
  }
  c.m = best;
  return c;
}

}  // namespace affine
