#include <unsupported/Eigen/MatrixFunctions>

#include "affine/cone.hpp"
#include "test_util.hpp"

namespace affine {
namespace {

using testing::random_cone;
using testing::random_matrix;
using testing::random_sym;

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kConfig;  // sentinel: nothing thrown
}

TEST(SymElement, RejectsAsymmetricInput) {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = 1e-6;
  EXPECT_EQ(code_of([&] { SymElement s(a); }), ErrorCode::kNotSymmetric);
  a(0, 1) = 1e-14;
  EXPECT_NO_THROW(SymElement{a});
}

TEST(ConeElement, RejectsIndefinite) {
  EXPECT_EQ(code_of([] { ConeElement c(Matrix(Eigen::Vector2d(1.0, -1.0).asDiagonal())); }),
            ErrorCode::kNotInCone);
}

TEST(TraceInner, Examples) {
  EXPECT_DOUBLE_EQ(trace_inner(SymElement::identity(2), SymElement::identity(2)), 2.0);
  std::mt19937_64 g(1);
  const SymElement x = random_sym(g, 3);
  EXPECT_EQ(trace_inner(x, SymElement(3)), 0.0);
  const SymElement y = random_sym(g, 3);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) s += x(i, j) * y(i, j);
  }
  EXPECT_NEAR(trace_inner(x, y), s, 1e-14);
  EXPECT_DOUBLE_EQ(trace_inner(x, y), trace_inner(y, x));
  EXPECT_NEAR(hs_norm(x), std::sqrt(trace_inner(x, x)), 1e-15);
  EXPECT_EQ(code_of([&] { trace_inner(x, SymElement(2)); }), ErrorCode::kDimensionMismatch);
}

TEST(IsInCone, Examples) {
  EXPECT_TRUE(is_in_cone(SymElement::identity(2)));
  EXPECT_FALSE(is_in_cone(SymElement(Matrix(Eigen::Vector2d(1.0, -1.0).asDiagonal()))));
  std::mt19937_64 g(2);
  for (int k = 0; k < 20; ++k) {
    EXPECT_TRUE(is_in_cone(SymElement::outer(random_matrix(g, 3, 1))));
  }
  EXPECT_TRUE(is_in_cone(SymElement(Matrix::Constant(1, 1, -1e-11))));
  EXPECT_FALSE(is_in_cone(SymElement(Matrix::Constant(1, 1, -1e-9))));
}

TEST(ConeProject, Examples) {
  const ConeElement p = cone_project(SymElement(Matrix(Eigen::Vector2d(2.0, -1.0).asDiagonal())));
  EXPECT_NEAR((p.matrix() - Matrix(Eigen::Vector2d(2.0, 0.0).asDiagonal())).norm(), 0.0, 1e-14);
  EXPECT_EQ(cone_project(SymElement(Matrix::Constant(1, 1, -3.0))).matrix()(0, 0), 0.0);
  std::mt19937_64 g(3);
  for (int k = 0; k < 20; ++k) {
    const ConeElement x = random_cone(g, 3);
    EXPECT_NEAR((cone_project(x).matrix() - x.matrix()).norm(), 0.0, 1e-12 * (1 + x.matrix().norm()));
  }
}

TEST(TensorSquare, Examples) {
  std::mt19937_64 g(4);
  EXPECT_EQ(tensor_square(SymElement(3)).matrix().norm(), 0.0);
  const SymElement x = random_sym(g, 3), y = random_sym(g, 3);
  const SuperOperator t = tensor_square(x);
  const double nx2 = trace_inner(x, x);
  EXPECT_NEAR((t.apply(x) - nx2 * x).matrix().norm(), 0.0, 1e-12);
  EXPECT_NEAR((t.apply(y) - trace_inner(x, y) * x).matrix().norm(), 0.0, 1e-12);
  EXPECT_NEAR(t.norm(), nx2, 1e-12 * nx2);
  Eigen::JacobiSVD<Matrix> svd(t.matrix());
  EXPECT_LT(svd.singularValues()(1), 1e-12 * nx2);
}

TEST(LyapunovSuperop, Examples) {
  const SuperOperator a = lyapunov_superop(-Matrix::Identity(2, 2));
  EXPECT_NEAR((a.matrix() + 2.0 * Matrix::Identity(3, 3)).norm(), 0.0, 1e-15);
  EXPECT_EQ(lyapunov_superop(Matrix::Zero(3, 3)).matrix().norm(), 0.0);
  std::mt19937_64 g(5);
  const Matrix G = random_matrix(g, 3, 3);
  const SymElement u = random_sym(g, 3);
  const Matrix want = G * u.matrix() + u.matrix() * G.transpose();
  EXPECT_NEAR((lyapunov_superop(G).apply(u).matrix() - want).norm(), 0.0, 1e-12);
  EXPECT_EQ(code_of([] { lyapunov_superop(Matrix::Zero(2, 3)); }), ErrorCode::kDimensionMismatch);
}

TEST(LyapunovSuperop, SpectrumIsPairwiseSums) {
  std::mt19937_64 g(6);
  const Matrix G = random_matrix(g, 3, 3) - 2.0 * Matrix::Identity(3, 3);
  const double sg = Eigen::EigenSolver<Matrix>(G).eigenvalues().real().maxCoeff();
  EXPECT_NEAR(spectral_bound(lyapunov_superop(G)), 2.0 * sg, 1e-10);
}

TEST(SuperopExp, Examples) {
  std::mt19937_64 g(7);
  const SymElement x = random_sym(g, 2);
  const SuperOperator a(2, random_matrix(g, 3, 3));
  EXPECT_NEAR((superop_exp_apply(a, 0.0, x) - x).matrix().norm(), 0.0, 1e-15);
  const SuperOperator m2(2, -2.0 * Matrix::Identity(3, 3));
  EXPECT_NEAR((superop_exp_apply(m2, 1.0, x) - std::exp(-2.0) * x).matrix().norm(), 0.0, 1e-14);
  // 30-term power series.
  const double t = 0.7;
  Vector term = vec(x), sum = vec(x);
  for (int k = 1; k <= 30; ++k) {
    term = (t / k) * (a.matrix() * term);
    sum += term;
  }
  EXPECT_NEAR((vec(superop_exp_apply(a, t, x)) - sum).norm(), 0.0, 1e-12 * sum.norm());
  const double s = 0.4;
  const SymElement lhs = superop_exp_apply(a, t + s, x);
  const SymElement rhs = superop_exp_apply(a, t, superop_exp_apply(a, s, x));
  EXPECT_LE((lhs - rhs).matrix().norm(), 1e-10 * lhs.matrix().norm());
}

TEST(SpectralBound, Examples) {
  EXPECT_NEAR(spectral_bound(lyapunov_superop(-Matrix::Identity(2, 2))), -2.0, 1e-14);
  EXPECT_EQ(spectral_bound(SuperOperator::zero(2)), 0.0);
  EXPECT_NEAR(spectral_bound(lyapunov_superop(Matrix(Eigen::Vector2d(-1.0, -3.0).asDiagonal()))),
              -2.0, 1e-14);
}

TEST(StabilityConstants, Examples) {
  const SuperOperator a(2, -2.0 * Matrix::Identity(3, 3));
  const StabilityCertificate c0 = stability_constants(a, 0.0);
  EXPECT_NEAR(c0.delta, 2.0, 1e-14);
  EXPECT_NEAR(c0.m, 1.0, 1e-12);
  const StabilityCertificate c1 = stability_constants(a, 0.1);
  EXPECT_NEAR(c1.delta, 1.8, 1e-14);
  EXPECT_GE(c1.m, 1.0);
  EXPECT_EQ(code_of([] { stability_constants(SuperOperator::zero(2)); }), ErrorCode::kNotSubcritical);
}

TEST(StabilityConstants, NonNormalGridMatchesFinerGrid) {
  Matrix G(2, 2);
  G << -1.0, 4.0, 0.0, -1.2;
  const SuperOperator a = lyapunov_superop(G);
  const StabilityCertificate c = stability_constants(a, 0.01, 400);
  const StabilityCertificate fine = stability_constants(a, 0.01, 4000);
  EXPECT_GT(c.m, 1.5);
  EXPECT_LE(std::abs(c.m - fine.m), 0.05 * fine.m);
  for (int k = 0; k <= 200; ++k) {
    const double t = c.horizon * k / 200.0;
    EXPECT_LE(exp_norm(a, t), 1.05 * c.m * std::exp(-c.delta * t) + 1e-12);
  }
}

TEST(ConeProperties, SelfDuality) {
  std::mt19937_64 g(8);
  for (int k = 0; k < 200; ++k) {
    EXPECT_GE(trace_inner(random_cone(g, 3), random_cone(g, 3)), -1e-10);
  }
}

TEST(ConeProperties, VecRoundTripAndIsometry) {
  std::mt19937_64 g(9);
  for (int n = 1; n <= 4; ++n) {
    const SymElement x = random_sym(g, n);
    EXPECT_LE((unvec(vec(x)) - x).matrix().cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(vec(x).norm(), hs_norm(x), 1e-12 * hs_norm(x));
    EXPECT_EQ(rank_from_sym_dim(sym_dim(n)), n);
  }
  EXPECT_EQ(code_of([] { rank_from_sym_dim(4); }), ErrorCode::kDimensionMismatch);
}

TEST(ConeProperties, LyapunovFlowPreservesCone) {
  std::mt19937_64 g(10);
  for (int k = 0; k < 50; ++k) {
    const Matrix G = random_matrix(g, 3, 3);
    const ConeElement u = random_cone(g, 3);
    const double t = 0.1 * (k % 10 + 1);
    const SymElement y = superop_exp_apply(lyapunov_superop(G), t, u);
    const Matrix e = (t * G).exp();
    EXPECT_NEAR((y.matrix() - e * u.matrix() * e.transpose()).norm(), 0.0,
                1e-10 * (1 + y.matrix().norm()));
    EXPECT_TRUE(is_in_cone(y, 1e-10 * (1 + y.matrix().norm())));
  }
}

TEST(SuperOperator, AdjointAndComposition) {
  std::mt19937_64 g(11);
  const SuperOperator a(2, random_matrix(g, 3, 3)), b(2, random_matrix(g, 3, 3));
  const SymElement x = random_sym(g, 2), y = random_sym(g, 2);
  EXPECT_NEAR(trace_inner(a.apply(x), y), trace_inner(x, a.adjoint().apply(y)), 1e-12);
  EXPECT_NEAR(((a * b).apply(x) - a.apply(b.apply(x))).matrix().norm(), 0.0, 1e-12);
}

}  // namespace
}  // namespace affine
