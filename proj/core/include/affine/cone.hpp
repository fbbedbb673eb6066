#pragma once

// Finite-rank model of the space of self-adjoint Hilbert-Schmidt operators:
// symmetric n x n matrices with the trace inner product, the PSD cone inside
// it, and linear maps on it ("super-operators").
//
// Super-operators act on the isometric symmetric vectorization of dimension
// N = n(n+1)/2: coordinate (i,i) carries a_ii and coordinate (i,j), i<j,
// carries sqrt(2) a_ij, so the Euclidean norm of vec(x) is the
// Hilbert-Schmidt norm of x. Coordinates are ordered row by row over the
// upper triangle: (0,0), (0,1), ..., (0,n-1), (1,1), ...

#include <Eigen/Dense>

#include <cstddef>

#include "affine/error.hpp"

namespace affine {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kDefaultPsdTol = 1e-10;

constexpr int sym_dim(int n) noexcept { return n * (n + 1) / 2; }

/// Inverse of sym_dim; throws if N is not triangular.
int rank_from_sym_dim(int big_n);

/// Symmetric n x n matrix. Construction checks symmetry to
/// 1e-12 (1 + max|a_ij|) and stores the exactly symmetrized average.
class SymElement {
 public:
  SymElement() = default;
  explicit SymElement(int n);
  explicit SymElement(const Matrix& m);

  static SymElement zero(int n) { return SymElement(n); }
  static SymElement identity(int n);
  /// v v^T
  static SymElement outer(const Vector& v);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  SymElement& operator+=(const SymElement& o);
  SymElement& operator-=(const SymElement& o);
  SymElement& operator*=(double s);
  friend SymElement operator+(SymElement a, const SymElement& b) { return a += b; }
  friend SymElement operator-(SymElement a, const SymElement& b) { return a -= b; }
  friend SymElement operator*(double s, SymElement a) { return a *= s; }
  friend SymElement operator*(SymElement a, double s) { return a *= s; }

 private:
  Matrix m_;
};

/// Element of the PSD cone (smallest eigenvalue >= -tol at construction).
class ConeElement {
 public:
  ConeElement() = default;
  explicit ConeElement(SymElement x, double tol = kDefaultPsdTol);
  explicit ConeElement(const Matrix& m, double tol = kDefaultPsdTol)
      : ConeElement(SymElement(m), tol) {}

  static ConeElement zero(int n) { return ConeElement(SymElement(n)); }
  static ConeElement identity(int n) { return ConeElement(SymElement::identity(n)); }

  int dim() const noexcept { return inner_.dim(); }
  const SymElement& sym() const noexcept { return inner_; }
  const Matrix& matrix() const noexcept { return inner_.matrix(); }
  operator const SymElement&() const noexcept { return inner_; }  // NOLINT

 private:
  SymElement inner_;
};

double trace_inner(const SymElement& x, const SymElement& y);
double hs_norm(const SymElement& x);
double min_eigenvalue(const SymElement& x);
bool is_in_cone(const SymElement& x, double tol = kDefaultPsdTol);

/// Spectral clipping of negative eigenvalues.
ConeElement cone_project(const SymElement& x);

Vector vec(const SymElement& x);
SymElement unvec(const Vector& v);

/// Same maps for raw matrices (no symmetry check), real or complex.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vec_raw(
    const Eigen::MatrixBase<Derived>& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> v(sym_dim(n));
  const double r2 = 1.4142135623730951;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    v(k++) = m(i, i);
    for (int j = i + 1; j < n; ++j) v(k++) = r2 * m(i, j);
  }
  return v;
}

template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> unvec_raw(
    const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  const int n = rank_from_sym_dim(static_cast<int>(v.size()));
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m(n, n);
  const double inv_r2 = 0.7071067811865476;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    m(i, i) = v(k++);
    for (int j = i + 1; j < n; ++j) {
      m(i, j) = v(k++) * inv_r2;
      m(j, i) = m(i, j);
    }
  }
  return m;
}

/// Linear map on Sym(n), stored as an N x N matrix in vec coordinates.
class SuperOperator {
 public:
  SuperOperator() = default;
  explicit SuperOperator(int n);
  /// matrix must be N x N with N = sym_dim(n).
  SuperOperator(int n, Matrix matrix);

  static SuperOperator zero(int n) { return SuperOperator(n); }
  static SuperOperator identity(int n);

  int dim() const noexcept { return n_; }
  int vec_dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }

  SymElement apply(const SymElement& x) const;
  SuperOperator adjoint() const { return SuperOperator(n_, m_.transpose()); }
  /// Induced operator norm (largest singular value).
  double norm() const;

  SuperOperator& operator+=(const SuperOperator& o);
  SuperOperator& operator*=(double s);
  friend SuperOperator operator+(SuperOperator a, const SuperOperator& b) { return a += b; }
  friend SuperOperator operator*(double s, SuperOperator a) { return a *= s; }
  /// Composition (a after b).
  friend SuperOperator operator*(const SuperOperator& a, const SuperOperator& b);

 private:
  int n_ = 0;
  Matrix m_;
};

/// y -> <x, y> x
SuperOperator tensor_square(const SymElement& x);

/// u -> G u + u G^T
SuperOperator lyapunov_superop(const Matrix& g);

/// e^{tA} x (Pade scaling and squaring).
SymElement superop_exp_apply(const SuperOperator& a, double t, const SymElement& x);

/// max Re(lambda) over the spectrum of A.
double spectral_bound(const SuperOperator& a);

struct StabilityCertificate {
  double m = 1.0;      // >= 1
  double delta = 0.0;  // > 0
  double horizon = 0.0;
  int grid_points = 0;
};

/// Grid certificate for ||e^{tA}|| <= M e^{-delta t}: delta = -s(A)(1 - margin),
/// M = max(1, sup_t ||e^{tA}|| e^{delta t}) over a geometric t-grid on [0, 20/delta].
/// Throws kNotSubcritical when s(A) >= 0.
StabilityCertificate stability_constants(const SuperOperator& a, double margin = 0.01,
                                         int grid_points = 400);

/// ||e^{tA}|| (spectral norm).
double exp_norm(const SuperOperator& a, double t);

}  // namespace affine
