#include <unsupported/Eigen/MatrixFunctions>

#include "affine/ode.hpp"
#include "affine/quadrature.hpp"
#include "affine/riccati.hpp"
#include "affine/simulate.hpp"
#include "affine/stationary.hpp"
#include "test_util.hpp"

namespace affine {
namespace {

using testing::load_params;
using testing::random_cone;
using testing::random_matrix;
using testing::random_sym;

struct Moments {
  Vector mean;
  Matrix second;
};

// m' = D m + b_hat, S' = D S + S D^T + b_hat m^T + m b_hat^T + sum_k c_k(m) xi xi^T
// with D the state drift, c_k = w_k for m-atoms and <m, M_k>/|xi_k|^2 for mu-atoms.
Moments transition_moments(const AdmissibleParams& p, const ConeElement& x, double t) {
  const EffectiveDrift d = effective_drift(p);
  const Matrix D = d.B_hat.matrix().transpose();
  const Vector bh = vec(d.b_hat);
  const CompiledParams& c = p.compiled();
  const Eigen::Index N = c.big_n;
  const auto rhs = [&](double, const Vector& y) {
    const Vector m = y.head(N);
    const Matrix S = Eigen::Map<const Matrix>(y.data() + N, N, N);
    Matrix dS = D * S + S * D.transpose() + bh * m.transpose() + m * bh.transpose();
    for (const auto& a : c.m) dS += a.w * a.xi * a.xi.transpose();
    for (const auto& a : c.mu) dS += (a.mass.dot(m) / a.norm2) * a.xi * a.xi.transpose();
    Vector out(N + N * N);
    out.head(N) = D * m + bh;
    out.tail(N * N) = Eigen::Map<const Vector>(dS.data(), N * N);
    return out;
  };
  const Vector x0 = vec(x.sym());
  Vector y0(N + N * N);
  y0.head(N) = x0;
  const Matrix s0 = x0 * x0.transpose();
  y0.tail(N * N) = Eigen::Map<const Vector>(s0.data(), N * N);
  OdeOptions o;
  o.rtol = o.atol = 1e-12;
  o.keep_all = false;
  const Vector y = dopri5<double>(rhs, y0, 0.0, t, {}, o).y.back();
  return {y.head(N), Eigen::Map<const Matrix>(y.data() + N, N, N)};
}

AdmissibleParams ou_half_one_atom() {
  AtomicMeasure m;
  Matrix xi(2, 2);
  xi << 0.6, 0.2, 0.2, 0.4;
  m.atoms.push_back({1.0, ConeElement(xi)});
  AdmissibleParams p = AdmissibleParams::ou(-0.5 * Matrix::Identity(2, 2), SymElement::identity(2), m);
  p.validate();
  return p;
}

double z_score(double est, double want, double se) { return se > 0 ? std::abs(est - want) / se : std::abs(est - want) * 1e300; }

TEST(SimulateOuExact, DeterministicCases) {
  const Matrix G = (Matrix(2, 2) << -0.7, 0.3, 0.1, -0.4).finished();
  std::mt19937_64 g(1);
  const ConeElement x0 = random_cone(g, 2);
  const TimeGrid grid{0.5, 1.0, 3.0};
  const PathSample s = simulate_ou_exact(G, SymElement(2), {}, x0, grid, 7);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Matrix e = (grid[i] * G).exp();
    EXPECT_LE((s.states[i].matrix() - e * x0.matrix() * e.transpose()).norm(), 1e-12);
  }
  const SymElement b = random_cone(g, 2).sym();
  const PathSample z = simulate_ou_exact(Matrix::Zero(2, 2), b, {}, x0, grid, 7);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LE(hs_norm(z.states[i].sym() - (x0.sym() + grid[i] * b)), 1e-12);
  }
  EXPECT_EQ(s.scheme, Scheme::kOuExact);
}

TEST(SimulateOuExact, RejectsDriftViolation) {
  AtomicMeasure m;
  m.atoms.push_back({2.0, ConeElement(0.5 * SymElement::identity(2))});
  try {
    simulate_ou_exact(-Matrix::Identity(2, 2), 0.1 * SymElement::identity(2), m, ConeElement::identity(2), {1.0}, 1);
    FAIL() << "expected kDriftConditionViolated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDriftConditionViolated);
  }
}

TEST(SimulateOuExact, EnsembleMeanMatchesStationaryQuadrature) {
  const AdmissibleParams p = ou_half_one_atom();
  auto sim = make_simulator(p, 0.01);
  ASSERT_EQ(sim->scheme(), Scheme::kOuExact);
  const ConeElement x0 = ConeElement::identity(2);
  const auto paths = simulate_paths(*sim, x0, {5.0}, 11, 100000);
  const EnsembleStats st = ensemble_stats(paths);
  const Moments want = transition_moments(p, x0, 5.0);
  const Vector got = vec(st.mean[0]);
  for (int i = 0; i < got.size(); ++i) {
    EXPECT_LE(z_score(got(i), want.mean(i), st.mean_se[0](i)), 3.0) << i;
  }
  // Mean at t = 5 is the tail-corrected stationary integral.
  const EffectiveDrift d = effective_drift(p);
  const QuadratureRule r = gauss_legendre_panels(0.0, 5.0, 10);
  SymElement q = superop_exp_apply(d.B_hat.adjoint(), 5.0, x0);
  for (std::size_t i = 0; i < r.size(); ++i) q += r.weights[i] * superop_exp_apply(d.B_hat.adjoint(), r.nodes[i], d.b_hat);
  EXPECT_LE((vec(q) - want.mean).norm(), 1e-9);
}

TEST(SimulateThinning, DeterministicFlow) {
  AdmissibleParams p(SymElement::identity(2), SuperOperator::zero(2), {}, {});
  p.validate();
  std::mt19937_64 g(2);
  const ConeElement x0 = random_cone(g, 2);
  const PathSample s = simulate_affine_thinning(p, x0, {0.3, 1.7}, 5, 0.05);
  EXPECT_EQ(s.scheme, Scheme::kThinning);
  EXPECT_LE(hs_norm(s.states[0].sym() - (x0.sym() + 0.3 * SymElement::identity(2))), 1e-12);
  EXPECT_LE(hs_norm(s.states[1].sym() - (x0.sym() + 1.7 * SymElement::identity(2))), 1e-12);
}

TEST(SimulateThinning, AgreesWithOuExactWithoutMu) {
  const AdmissibleParams p = ou_half_one_atom();
  const ConeElement x0 = ConeElement::identity(2);
  const TimeGrid grid{0.5, 2.0};
  const std::size_t n = 40000;
  ThinningSimulator thin(p, 0.01);
  auto exact = make_simulator(p, 0.01);
  const EnsembleStats a = ensemble_stats(simulate_paths(thin, x0, grid, 21, n));
  const EnsembleStats b = ensemble_stats(simulate_paths(*exact, x0, grid, 22, n));
  for (std::size_t ti = 0; ti < grid.size(); ++ti) {
    const Vector da = vec(a.mean[ti]), db = vec(b.mean[ti]);
    for (int i = 0; i < da.size(); ++i) {
      const double se = std::hypot(a.mean_se[ti](i), b.mean_se[ti](i));
      EXPECT_LE(z_score(da(i), db(i), se), 3.0) << "t=" << grid[ti] << " i=" << i;
    }
  }
}

TEST(SimulateThinning, LaplaceMatchesRiccati) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const ConeElement x0 = ConeElement::identity(2);
  std::mt19937_64 g(3);
  const ConeElement u = random_cone(g, 2, 0.6);
  const TimeGrid grid{0.5, 1.0, 2.0};
  ThinningSimulator sim(p, 0.01);
  const auto paths = simulate_paths(sim, x0, grid, 31, 100000);
  for (std::size_t ti = 0; ti < grid.size(); ++ti) {
    const McEstimate e = mc_estimate(paths, [&](const PathSample& s) { return std::exp(-trace_inner(u, s.states[ti])); });
    const double want = laplace_transition(p, x0, u, grid[ti], 1e-11);
    EXPECT_LE(z_score(e.mean, want, e.se), 3.0) << "t=" << grid[ti];
  }
}

TEST(SimulateThinning, TransitionMomentsMatch) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const ConeElement x0(Matrix((Matrix(2, 2) << 1.5, 0.3, 0.3, 0.8).finished()));
  const TimeGrid grid{1.0, 3.0};
  ThinningSimulator sim(p, 0.01);
  const EnsembleStats st = ensemble_stats(simulate_paths(sim, x0, grid, 41, 100000));
  for (std::size_t ti = 0; ti < grid.size(); ++ti) {
    const Moments want = transition_moments(p, x0, grid[ti]);
    const Vector m = vec(st.mean[ti]);
    const Matrix& s2 = st.second_moment[ti].matrix();
    for (int i = 0; i < m.size(); ++i) {
      EXPECT_LE(z_score(m(i), want.mean(i), st.mean_se[ti](i)), 3.0) << "t=" << grid[ti] << " i=" << i;
      for (int j = i; j < m.size(); ++j) {
        EXPECT_LE(z_score(s2(i, j), want.second(i, j), st.second_moment_se[ti](i, j)), 3.0)
            << "t=" << grid[ti] << " (" << i << "," << j << ")";
      }
    }
  }
}

TEST(Simulate, ReproducibleAcrossThreadCounts) {
  const AdmissibleParams p = load_params("mu_n2.json");
  ThinningSimulator sim(p, 0.02);
  const TimeGrid grid{0.5, 1.0};
  const auto a = simulate_paths(sim, ConeElement::identity(2), grid, 99, 300, 1);
  const auto b = simulate_paths(sim, ConeElement::identity(2), grid, 99, 300, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t t = 0; t < grid.size(); ++t) {
      EXPECT_EQ(a[i].states[t].matrix(), b[i].states[t].matrix());
    }
  }
  const PathSample single = run_path(sim, ConeElement::identity(2), grid, 99, 17);
  EXPECT_EQ(single.states[1].matrix(), a[17].states[1].matrix());
  EXPECT_EQ(single.path_index, 17u);
}

TEST(Simulate, StatesStayInCone) {
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    const AdmissibleParams p = load_params(name);
    auto sim = make_simulator(p, 0.01);
    TimeGrid grid;
    for (int k = 1; k <= 20; ++k) grid.push_back(0.25 * k);
    for (const auto& path : simulate_paths(*sim, ConeElement::zero(2), grid, 5, 500)) {
      for (const auto& s : path.states) EXPECT_GE(min_eigenvalue(s.sym()), -1e-8) << name;
    }
  }
}

TEST(EnsembleStats, DeterministicPathsHaveZeroError) {
  AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {});
  p.validate();
  auto sim = make_simulator(p, 0.01);
  const EnsembleStats st = ensemble_stats(simulate_paths(*sim, ConeElement::identity(2), {1.0, 2.0}, 3, 50));
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_EQ(st.mean_se[t].norm(), 0.0);
    EXPECT_EQ(st.second_moment_se[t].norm(), 0.0);
  }
}

TEST(EnsembleStats, StandardErrorScaling) {
  const AdmissibleParams p = load_params("ou_n2.json");
  auto sim = make_simulator(p, 0.01);
  const auto small = ensemble_stats(simulate_paths(*sim, ConeElement::identity(2), {1.0}, 8, 20000));
  const auto big = ensemble_stats(simulate_paths(*sim, ConeElement::identity(2), {1.0}, 9, 40000));
  for (int i = 0; i < 3; ++i) {
    const double ratio = small.mean_se[0](i) / big.mean_se[0](i);
    EXPECT_NEAR(ratio, std::sqrt(2.0), 0.3 * std::sqrt(2.0));
  }
}

TEST(EnsembleStats, GridMismatch) {
  const AdmissibleParams p = load_params("ou_n2.json");
  auto sim = make_simulator(p, 0.01);
  auto a = simulate_paths(*sim, ConeElement::identity(2), {1.0}, 1, 2);
  a.push_back(run_path(*sim, ConeElement::identity(2), {2.0}, 1, 9));
  try {
    ensemble_stats(a);
    FAIL() << "expected kGridMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGridMismatch);
  }
}

TEST(StationarySampler, MeanAndLaplace) {
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    const AdmissibleParams p = load_params(name);
    const StationaryLaw law(p);
    const StationarySample s = stationary_sampler(p, 10.0 / law.delta(), 0.0, 20000, 51);
    ASSERT_EQ(s.samples.size(), 20000u);
    EXPECT_GE(s.bias_bound, 0.0);
    const Vector z = vec(law.mean());
    for (int i = 0; i < z.size(); ++i) {
      const McEstimate e = mc_estimate(s.samples, [&](const ConeElement& x) { return vec(x.sym())(i); });
      EXPECT_LE(z_score(e.mean, z(i), e.se), 3.0) << name << " i=" << i;
    }
    const ConeElement u = ConeElement(0.5 * SymElement::identity(2));
    const McEstimate e = mc_estimate(s.samples, [&](const ConeElement& x) { return std::exp(-trace_inner(u, x)); });
    EXPECT_LE(z_score(e.mean, law.laplace(u), e.se), 3.0) << name;
  }
}

TEST(StationarySampler, ScalarMeanOne) {
  AtomicMeasure m;
  m.atoms.push_back({1.0, ConeElement(Matrix::Constant(1, 1, 0.5))});
  AdmissibleParams p = AdmissibleParams::ou(Matrix::Constant(1, 1, -0.5), SymElement(Matrix::Constant(1, 1, 1.0)), m);
  p.validate();
  ASSERT_NEAR(mean_invariant(p).matrix()(0, 0), 1.0, 1e-15);
  StationarySamplerOptions opt;
  opt.samples_per_chain = 10;
  const StationarySample s = stationary_sampler(p, 10.0, 5.0, 20000, 61, opt);
  const McEstimate e = mc_estimate(s.samples, [](const ConeElement& x) { return x.matrix()(0, 0); });
  EXPECT_LE(z_score(e.mean, 1.0, e.se), 3.0);
}

TEST(StationarySampler, RejectsSupercritical) {
  AdmissibleParams p = AdmissibleParams::ou(0.2 * Matrix::Identity(2, 2), SymElement::identity(2), {});
  p.validate();
  try {
    stationary_sampler(p, 1.0, 0.0, 10, 1);
    FAIL() << "expected kNotSubcritical";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotSubcritical);
  }
}

TEST(StationarySecondMoment, MatchesLongRunSamples) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const StationaryLaw law(p);
  const StationarySample s = stationary_sampler(p, 10.0 / law.delta(), 0.0, 40000, 71);
  std::mt19937_64 g(12);
  for (int k = 0; k < 3; ++k) {
    const Vector v = vec(random_sym(g, 2));
    const McEstimate e = mc_estimate(s.samples, [&](const ConeElement& x) { return std::pow(vec(x.sym()).dot(v), 2); });
    EXPECT_LE(z_score(e.mean, v.dot(law.second_moment().matrix() * v), e.se), 3.0) << k;
  }
}

}  // namespace
}  // namespace affine
