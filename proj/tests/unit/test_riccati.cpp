#include "affine/riccati.hpp"
#include "test_util.hpp"

namespace affine {
namespace {

using testing::load_params;
using testing::random_cone;
using testing::random_subcritical;
using testing::random_sym;

SymElement scaled_identity(int n, double s) { return s * SymElement::identity(n); }

AdmissibleParams single_atom_example() {
  AtomicMeasure m;
  m.atoms.push_back({1.0, ConeElement(scaled_identity(2, 0.5))});
  AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), m);
  p.validate();
  return p;
}

TEST(FEval, Examples) {
  const AdmissibleParams p = single_atom_example();
  EXPECT_EQ(F_eval(p, SymElement(2)), 0.0);
  EXPECT_NEAR(F_eval(p, SymElement::identity(2)), 2.0 - std::exp(-1.0), 1e-15);
  const AdmissibleParams q = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {});
  std::mt19937_64 g(1);
  const SymElement u = random_sym(g, 2);
  EXPECT_NEAR(F_eval(q, u), trace_inner(q.b(), u), 1e-15);
}

TEST(FEval, GrowthBound) {
  std::mt19937_64 g(2);
  for (int k = 0; k < 100; ++k) {
    const AdmissibleParams p = random_subcritical(g);
    const ConeElement u = random_cone(g, 2, 0.3 + 0.1 * (k % 10));
    const double c = hs_norm(p.b()) + p.m().second_moment();
    const double un = hs_norm(u.sym());
    EXPECT_LE(std::abs(F_eval(p, u)), c * (un + un * un) * (1 + 1e-12));
  }
}

TEST(REval, Examples) {
  std::mt19937_64 g(3);
  const AdmissibleParams o = load_params("ou_n2.json");
  EXPECT_LT(hs_norm(R_eval(o, SymElement(2))), 1e-15);
  const SymElement u = random_cone(g, 2).sym();
  EXPECT_NEAR(hs_norm(R_eval(o, u) - o.B().adjoint().apply(u)), 0.0, 1e-14);

  const ConeElement big_m = random_cone(g, 2, 0.5), xi = random_cone(g, 2, 0.8);
  OperatorMeasure mu;
  mu.atoms.push_back({big_m, xi});
  const AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {}, mu);
  const double xn2 = trace_inner(xi, xi);
  const double xu = trace_inner(xi, u);
  const double chi_u = is_small_jump(xi) ? xu : 0.0;
  const double coef = -(std::exp(-xu) - 1.0 + chi_u) / xn2;
  const SymElement diff = R_eval(p, u) - p.B().adjoint().apply(u);
  EXPECT_NEAR(hs_norm(diff - coef * big_m.sym()), 0.0, 1e-14 * (1 + hs_norm(diff)));
}

TEST(REval, GrowthBound) {
  std::mt19937_64 g(4);
  for (int k = 0; k < 100; ++k) {
    const AdmissibleParams p = random_subcritical(g);
    const ConeElement u = random_cone(g, 2, 0.3 + 0.1 * (k % 10));
    const double c = p.B().norm() + hs_norm(p.mu().total_mass(2));
    const double un = hs_norm(u.sym());
    EXPECT_LE(hs_norm(R_eval(p, u)), c * (un + un * un) * (1 + 1e-12));
  }
}

TEST(SolveRiccati, ZeroArgumentStaysZero) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const RiccatiSolution s = solve_riccati(p, ConeElement::zero(2), 2.0);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    EXPECT_EQ(hs_norm(s.psi[i].sym()), 0.0);
    EXPECT_EQ(s.phi[i], 0.0);
  }
}

TEST(SolveRiccati, InitialConditions) {
  std::mt19937_64 g(5);
  const AdmissibleParams p = load_params("mu_n2.json");
  const ConeElement u = random_cone(g, 2);
  const RiccatiSolution s = solve_riccati(p, u, 1.0);
  EXPECT_EQ(s.times.front(), 0.0);
  EXPECT_EQ(s.times.back(), 1.0);
  EXPECT_EQ(s.phi.front(), 0.0);
  EXPECT_EQ(hs_norm(s.psi.front().sym() - u.sym()), 0.0);
}

TEST(SolveRiccati, LinearCaseMatchesMatrixExponential) {
  const AdmissibleParams p = load_params("ou_n2.json");
  std::mt19937_64 g(6);
  const double tol = 1e-9;
  const ConeElement u = random_cone(g, 2);
  const std::vector<double> stops{0.25, 0.5, 1.0, 2.0};
  const RiccatiSolution s = solve_riccati(p, u, 3.0, tol, stops);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    const SymElement want = superop_exp_apply(p.B().adjoint(), s.times[i], u);
    EXPECT_LE(hs_norm(s.psi[i].sym() - want), 10 * tol * std::max(1.0, hs_norm(want)))
        << "t=" << s.times[i];
  }
  for (double t : stops) {
    EXPECT_TRUE(std::find(s.times.begin(), s.times.end(), t) != s.times.end());
  }
}

TEST(SolveRiccati, SemiflowOnRandomInstances) {
  std::mt19937_64 g(7);
  const double tol = 1e-9;
  for (int k = 0; k < 20; ++k) {
    const AdmissibleParams p = random_subcritical(g);
    ASSERT_TRUE(p.validated());
    const ConeElement u = random_cone(g, 2);
    const SymElement one = solve_riccati(p, u, 1.0, tol).psi.back().sym();
    const ConeElement half = solve_riccati(p, u, 0.5, tol).psi.back();
    const SymElement twice = solve_riccati(p, half, 0.5, tol).psi.back().sym();
    EXPECT_LE(hs_norm(one - twice), 20 * tol * hs_norm(u.sym()));
  }
}

TEST(SolveRiccati, ConeInvarianceAndNormBound) {
  std::mt19937_64 g(8);
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    AdmissibleParams p = load_params(name);
    p.validate();
    const SuperOperator bh = effective_drift(p).B_hat;
    const StabilityCertificate cert = stability_constants(bh);
    for (int k = 0; k < 10; ++k) {
      const ConeElement u = random_cone(g, 2, 1.5);
      const double un = hs_norm(u.sym());
      const RiccatiSolution s = solve_riccati(p, u, 5.0);
      for (std::size_t i = 0; i < s.times.size(); ++i) {
        const double pn = hs_norm(s.psi[i].sym());
        EXPECT_TRUE(is_in_cone(s.psi[i].sym()));
        EXPECT_LE(pn, exp_norm(bh, s.times[i]) * un * (1 + 1e-8) + 1e-12) << name;
        EXPECT_LE(pn, cert.m * std::exp(-cert.delta * s.times[i]) * un * (1 + 1e-8) + 1e-12);
      }
    }
  }
}

TEST(SolveRiccati, DenseOutputHitsNodes) {
  std::mt19937_64 g(9);
  const AdmissibleParams p = load_params("mu_n2.json");
  const RiccatiSolution s = solve_riccati(p, random_cone(g, 2), 2.0);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    EXPECT_NEAR(s.phi_at(s.times[i]), s.phi[i], 1e-15);
  }
  const std::size_t mid = s.times.size() / 2;
  const double tm = 0.5 * (s.times[mid] + s.times[mid + 1]);
  const RiccatiSolution exact = solve_riccati(p, s.u0, 2.0, 1e-9, {tm});
  const auto it = std::find(exact.times.begin(), exact.times.end(), tm);
  ASSERT_NE(it, exact.times.end());
  const std::size_t j = static_cast<std::size_t>(it - exact.times.begin());
  // Cubic Hermite remainder h^4/384 |y^(4)| with |y^(4)| <= L^4 |u|, L a Lipschitz bound of R.
  const double h = s.times[mid + 1] - s.times[mid];
  const double un = hs_norm(s.u0.sym());
  const double lip = (p.B().norm() + hs_norm(p.mu().total_mass(2))) * (1 + 2 * un);
  const double bound = std::pow(h * lip, 4) / 384 * un + 1e-8;
  EXPECT_LE(hs_norm(s.psi_at(tm) - exact.psi[j].sym()), bound);
  EXPECT_LE(std::abs(s.phi_at(tm) - exact.phi[j]), bound * (hs_norm(p.b()) + p.m().second_moment() + 1));
}

TEST(SolveRiccati, RequiresValidation) {
  const AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {});
  try {
    solve_riccati(p, ConeElement::identity(2), 1.0);
    FAIL() << "expected kNotValidated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotValidated);
  }
}

TEST(LaplaceTransition, Examples) {
  std::mt19937_64 g(10);
  AdmissibleParams p = load_params("mu_n2.json");
  p.validate();
  const ConeElement x = random_cone(g, 2), u = random_cone(g, 2);
  EXPECT_EQ(laplace_transition(p, x, ConeElement::zero(2), 1.3), 1.0);
  EXPECT_NEAR(laplace_transition(p, x, u, 0.0), std::exp(-trace_inner(x, u)), 1e-15);
  for (double t : {0.1, 1.0, 5.0}) {
    const double v = laplace_transition(p, x, u, t);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(LaplaceTransition, AntitoneInArgument) {
  std::mt19937_64 g(11);
  for (int k = 0; k < 20; ++k) {
    const AdmissibleParams p = random_subcritical(g);
    const ConeElement x = random_cone(g, 2), u = random_cone(g, 2);
    const ConeElement up(u.sym() + random_cone(g, 2, 0.5).sym());
    const double t = 0.2 + 0.2 * k;
    EXPECT_GE(laplace_transition(p, x, u, t), laplace_transition(p, x, up, t) - 1e-9);
  }
}

TEST(GrowthEnvelope, Examples) {
  AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {});
  const GrowthEnvelope e = growth_envelope(p, SymElement::identity(2));
  EXPECT_NEAR(e.C, std::sqrt(2.0), 1e-15);
  const GrowthEnvelope z = growth_envelope(p, SymElement(2));
  for (double t : {0.0, 1.0, 10.0}) EXPECT_EQ(z.envelope(t), 0.0);
  EXPECT_EQ(z.horizon(1e-10), 0.0);
}

TEST(GrowthEnvelope, BoundsIntegrand) {
  std::mt19937_64 g(12);
  AdmissibleParams p = load_params("mu_n2.json");
  p.validate();
  const ConeElement u = random_cone(g, 2);
  const GrowthEnvelope e = growth_envelope(p, u.sym());
  const RiccatiSolution s = solve_riccati(p, u, 8.0);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    EXPECT_LE(std::abs(F_eval(p, s.psi[i].sym())), e.envelope(s.times[i]) * (1 + 1e-9));
  }
}

TEST(GrowthEnvelope, HorizonDoubling) {
  std::mt19937_64 g(13);
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    AdmissibleParams p = load_params(name);
    p.validate();
    const ConeElement u = random_cone(g, 2);
    const double T = growth_envelope(p, u.sym()).horizon(1e-10);
    ASSERT_GT(T, 0.0);
    const double a = std::exp(-riccati_endpoint(p, vec(u.sym()), T, 1e-10).phi);
    const double b = std::exp(-riccati_endpoint(p, vec(u.sym()), 2 * T, 1e-10).phi);
    EXPECT_LT(std::abs(a - b), 1e-9) << name;
  }
}

TEST(ComplexEndpoint, AgreesWithRealOnRealArguments) {
  std::mt19937_64 g(14);
  AdmissibleParams p = load_params("mu_n2.json");
  p.validate();
  const Vector u = vec(random_cone(g, 2).sym());
  const RiccatiEndpoint r = riccati_endpoint(p, u, 1.5, 1e-10);
  const ComplexRiccatiEndpoint c = riccati_endpoint(p, CVector(u.cast<std::complex<double>>()), 1.5, 1e-10);
  EXPECT_NEAR(std::abs(c.phi - r.phi), 0.0, 1e-8);
  EXPECT_LT(std::abs(c.phi.imag()), 1e-14);
  EXPECT_LT((c.psi.real() - r.psi).norm(), 1e-8);
}

}  // namespace
}  // namespace affine
