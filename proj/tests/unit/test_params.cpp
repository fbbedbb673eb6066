#include "affine/params.hpp"
#include "test_util.hpp"

namespace affine {
namespace {

using testing::load_params;
using testing::random_cone;
using testing::random_sym;

const ConditionVerdict& verdict(const ValidationReport& r, const std::string& prefix) {
  for (const auto& c : r.conditions) {
    if (c.name.rfind(prefix, 0) == 0) return c;
  }
  throw std::runtime_error("no condition " + prefix);
}

SymElement diag2(double a, double b) { return SymElement(Matrix(Eigen::Vector2d(a, b).asDiagonal())); }

AdmissibleParams with_one_big_mu() {
  OperatorMeasure mu;
  mu.atoms.push_back({ConeElement(diag2(0.5, 0.2)), ConeElement(diag2(2.0, 1.0))});
  return AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {}, mu);
}

TEST(SmallJumpCompensator, Examples) {
  EXPECT_EQ(small_jump_compensator({}, 2).matrix().norm(), 0.0);
  const ConeElement xi(diag2(0.3, 0.4));  // ||xi|| = 0.5
  AtomicMeasure m;
  m.atoms.push_back({2.0, xi});
  EXPECT_NEAR((small_jump_compensator(m, 2) - 2.0 * xi.sym()).matrix().norm(), 0.0, 1e-15);
  AtomicMeasure big;
  big.atoms.push_back({2.0, ConeElement(diag2(3.0, 0.0))});
  EXPECT_EQ(small_jump_compensator(big, 2).matrix().norm(), 0.0);
}

TEST(Validate, PositiveDriftOuPasses) {
  const AdmissibleParams p =
      AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), {}, {});
  EXPECT_TRUE(validate(p).all_pass());
}

TEST(Validate, BundledSpecsPass) {
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    AdmissibleParams p = load_params(name);
    EXPECT_TRUE(p.validate().all_pass()) << name;
    EXPECT_TRUE(p.validated());
    EXPECT_NO_THROW(p.require_validated());
  }
}

TEST(Validate, DriftConditionFails) {
  AtomicMeasure m;
  m.atoms.push_back({0.7, ConeElement(diag2(0.3, 0.2))});
  const AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement(2), m, {});
  const ValidationReport r = validate(p);
  EXPECT_FALSE(verdict(r, "(ii)").pass);
  EXPECT_LT(verdict(r, "(ii)").worst, 0.0);
  EXPECT_FALSE(r.all_pass());
  AdmissibleParams q = p;
  q.validate();
  EXPECT_FALSE(q.validated());
  try {
    q.require_validated();
    FAIL() << "expected kNotValidated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotValidated);
  }
}

TEST(Validate, QuasiMonotonicityFails) {
  OperatorMeasure mu;
  mu.atoms.push_back({ConeElement::identity(2), ConeElement(diag2(0.5, 0.5))});
  const AdmissibleParams p(SymElement::identity(2), SuperOperator::zero(2), {}, mu);
  const ValidationReport r = validate(p, 100);
  EXPECT_FALSE(verdict(r, "(iv)").pass);
  EXPECT_TRUE(verdict(r, "(ii)").pass);
}

TEST(Validate, AutomaticConditionsRecorded) {
  const ValidationReport r = validate(load_params("ou_n2.json"));
  EXPECT_TRUE(verdict(r, "(i)(a)").automatic);
  EXPECT_TRUE(verdict(r, "(iii)").automatic);
  EXPECT_FALSE(verdict(r, "(ii)").automatic);
}

TEST(Validate, DeterministicGivenSeed) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const ValidationReport a = validate(p, 100, 1e-10, 42), b = validate(p, 100, 1e-10, 42);
  ASSERT_EQ(a.conditions.size(), b.conditions.size());
  for (std::size_t i = 0; i < a.conditions.size(); ++i) {
    EXPECT_EQ(a.conditions[i].worst, b.conditions[i].worst);
    EXPECT_EQ(a.conditions[i].detail, b.conditions[i].detail);
  }
}

TEST(EffectiveDrift, SmallAtomsOnly) {
  AtomicMeasure m;
  m.atoms.push_back({1.0, ConeElement(diag2(0.3, 0.3))});
  const AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), m);
  const EffectiveDrift d = effective_drift(p);
  EXPECT_EQ((d.b_hat - p.b()).matrix().norm(), 0.0);
  EXPECT_EQ((d.B_hat.matrix() - p.B().matrix().transpose()).norm(), 0.0);
}

TEST(EffectiveDrift, BigAtomShiftsConstantDrift) {
  AtomicMeasure m;
  m.atoms.push_back({1.0, ConeElement(SymElement(Matrix(2.0 * Matrix::Identity(2, 2))))});
  const AdmissibleParams p = AdmissibleParams::ou(-Matrix::Identity(2, 2), SymElement::identity(2), m);
  EXPECT_NEAR((effective_drift(p).b_hat.matrix() - 3.0 * Matrix::Identity(2, 2)).norm(), 0.0, 1e-15);
}

TEST(EffectiveDrift, BigMuAtomIsRankOneWithRangeM) {
  const AdmissibleParams p = with_one_big_mu();
  const Matrix diff = effective_drift(p).B_hat.matrix() - p.B().matrix().transpose();
  Eigen::JacobiSVD<Matrix> svd(diff, Eigen::ComputeFullU);
  EXPECT_GT(svd.singularValues()(0), 1e-3);
  EXPECT_LT(svd.singularValues()(1), 1e-14);
  const Vector mv = vec(diag2(0.5, 0.2));
  const Vector u0 = svd.matrixU().col(0);
  EXPECT_NEAR(std::abs(u0.dot(mv)), mv.norm(), 1e-12);
}

TEST(EffectiveDrift, EmptyMuGivesAdjoint) {
  const AdmissibleParams p = load_params("ou_n2.json");
  EXPECT_EQ((effective_drift(p).B_hat.matrix() - p.B().matrix().transpose()).norm(), 0.0);
}

TEST(EffectiveDrift, AdditiveInMeasures) {
  std::mt19937_64 g(3);
  AtomicMeasure m1, m2, both;
  for (int k = 0; k < 3; ++k) {
    m1.atoms.push_back({0.5 + k, random_cone(g, 2, 1.0)});
    m2.atoms.push_back({1.0 + k, random_cone(g, 2, 0.4)});
  }
  both.atoms = m1.atoms;
  both.atoms.insert(both.atoms.end(), m2.atoms.begin(), m2.atoms.end());
  const Matrix G = -Matrix::Identity(2, 2);
  const SymElement b = SymElement::identity(2);
  const SymElement d1 = effective_drift(AdmissibleParams::ou(G, b, m1)).b_hat - b;
  const SymElement d2 = effective_drift(AdmissibleParams::ou(G, b, m2)).b_hat - b;
  const SymElement d12 = effective_drift(AdmissibleParams::ou(G, b, both)).b_hat - b;
  EXPECT_NEAR((d12 - d1 - d2).matrix().norm(), 0.0, 1e-13);
}

TEST(JumpRates, Examples) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const auto r0 = jump_rates(p, ConeElement::zero(2));
  ASSERT_EQ(r0.size(), p.m().atoms.size() + p.mu().atoms.size());
  for (std::size_t k = 0; k < p.m().atoms.size(); ++k) EXPECT_EQ(r0[k].rate, p.m().atoms[k].w);
  for (std::size_t k = p.m().atoms.size(); k < r0.size(); ++k) EXPECT_EQ(r0[k].rate, 0.0);

  OperatorMeasure mu;
  mu.atoms.push_back({ConeElement::identity(2), ConeElement(diag2(1.0, 0.0))});
  const AdmissibleParams q(SymElement::identity(2), lyapunov_superop(-Matrix::Identity(2, 2)), {}, mu);
  EXPECT_NEAR(jump_rates(q, ConeElement::identity(2)).at(0).rate, 2.0, 1e-15);

  std::mt19937_64 g(4);
  const ConeElement x = random_cone(g, 2);
  const ConeElement x2(SymElement(2.0 * x.sym()));
  const auto r1 = jump_rates(p, x), r2 = jump_rates(p, x2);
  for (std::size_t k = p.m().atoms.size(); k < r1.size(); ++k) {
    EXPECT_NEAR(r2[k].rate, 2.0 * r1[k].rate, 1e-13);
  }
}

TEST(JumpRates, NonNegativeOnRandomStates) {
  const AdmissibleParams p = load_params("mu_n2.json");
  std::mt19937_64 g(5);
  for (int k = 0; k < 10000; ++k) {
    for (const auto& r : jump_rates(p, random_cone(g, 2))) EXPECT_GE(r.rate, 0.0);
  }
}

TEST(ParamsJson, RoundTrip) {
  const AdmissibleParams p = load_params("mu_n2.json");
  const AdmissibleParams q = params_from_json(params_to_json(p));
  EXPECT_NEAR((p.B().matrix() - q.B().matrix()).norm(), 0.0, 1e-15);
  EXPECT_NEAR((p.b() - q.b()).matrix().norm(), 0.0, 1e-15);
  EXPECT_EQ(p.mu().atoms.size(), q.mu().atoms.size());
  const AdmissibleParams o = load_params("ou_n2.json");
  EXPECT_TRUE(o.lyapunov_generator().has_value());
  EXPECT_TRUE(params_from_json(params_to_json(o)).lyapunov_generator().has_value());
}

TEST(ParamsJson, RejectsUnknownKeysAndBadShapes) {
  const auto code = [](const std::string& text) {
    try {
      params_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  EXPECT_EQ(code(R"({"dim":1,"b":[1],"B":[-1],"extra":0})"), ErrorCode::kConfig);
  EXPECT_EQ(code(R"({"dim":1,"b":[1],"B":[-1, 0]})"), ErrorCode::kConfig);
  EXPECT_EQ(code(R"({"dim":1,"b":[1],"B":[-1],"m":[{"w":1,"xi":[-1]}]})"), ErrorCode::kConfig);
  EXPECT_EQ(code(R"({"dim":1,"b":[1],"B":[-1)"), ErrorCode::kConfig);
  EXPECT_NO_THROW(params_from_json(R"({"dim":1,"b":[1],"B":[-1]})"));
}

}  // namespace
}  // namespace affine
