#include "criteria.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "affine/forward.hpp"
#include "affine/io.hpp"
#include "affine/parallel.hpp"
#include "affine/quadrature.hpp"
#include "affine/rng.hpp"
#include "affine/wasserstein.hpp"

namespace affine::acceptance {
namespace {

using cd = std::complex<double>;
using Clock = std::chrono::steady_clock;

// Collects CSV rows and the verdict of one criterion.
class Report {
 public:
  Report(int id, std::string title, const Options& opt)
      : opt_(opt), start_(Clock::now()) {
    res_.id = id;
    res_.title = std::move(title);
    const std::string key = res_.title + "/" + std::to_string(opt.seed);
    csv_ = std::make_unique<CsvWriter>(os_, fnv1a64(key),
                                       std::vector<std::string>{"case", "quantity", "value", "reference", "bound", "ok"});
  }

  // Records value against reference; ok when |value - reference| <= bound.
  bool near(const std::string& c, const std::string& q, double value, double reference, double bound) {
    return put(c, q, value, reference, bound, std::abs(value - reference) <= bound);
  }
  // ok when value <= bound.
  bool at_most(const std::string& c, const std::string& q, double value, double bound) {
    return put(c, q, value, std::numeric_limits<double>::quiet_NaN(), bound, value <= bound);
  }
  bool at_least(const std::string& c, const std::string& q, double value, double bound) {
    return put(c, q, value, std::numeric_limits<double>::quiet_NaN(), bound, value >= bound);
  }
  void info(const std::string& c, const std::string& q, double value) {
    csv_->row(std::vector<std::string>{c, q, format_double(value), "", "", ""});
  }
  void require(bool ok) { all_ &= ok; }
  void log(const std::string& line) const {
    if (opt_.log) *opt_.log << "  [" << res_.id << "] " << line << std::endl;
  }

  CriterionResult finish(std::string summary) {
    res_.pass = all_ && failures_ == 0;
    res_.summary = std::move(summary);
    res_.artifact = os_.str();
    res_.seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    return std::move(res_);
  }
  int failures() const noexcept { return failures_; }

 private:
  bool put(const std::string& c, const std::string& q, double value, double reference, double bound, bool ok) {
    csv_->row(std::vector<std::string>{c, q, format_double(value), std::isnan(reference) ? "" : format_double(reference),
                                       format_double(bound), ok ? "1" : "0"});
    if (!ok) ++failures_;
    return ok;
  }

  const Options& opt_;
  Clock::time_point start_;
  CriterionResult res_;
  std::ostringstream os_;
  std::unique_ptr<CsvWriter> csv_;
  int failures_ = 0;
  bool all_ = true;
};

std::string fmt(double x, int prec = 3) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

AdmissibleParams load(const Options& opt, const std::string& name) {
  AdmissibleParams p = params_from_json(read_text_file(opt.data_dir + "/" + name));
  p.validate();
  return p;
}

PricingModel load_desk(const Options& opt) {
  PricingModel m = pricing_model_from_json(read_text_file(opt.data_dir + "/bns_desk.json"));
  m.spec.x_params.validate();
  return m;
}

ConeElement random_cone(RandomStream& rng, int n, double scale) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = scale * rng.normal();
  }
  return ConeElement(SymElement(Matrix(a * a.transpose())));
}

Matrix random_matrix(RandomStream& rng, int r, int c, double scale) {
  Matrix a(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) a(i, j) = scale * rng.normal();
  }
  return a;
}

Vector unit_vector(RandomStream& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v / v.norm();
}

// ---------------------------------------------------------------------------
// 1

const ConditionVerdict& verdict(const ValidationReport& r, const char* prefix) {
  for (const auto& c : r.conditions) {
    if (c.name.rfind(prefix, 0) == 0) return c;
  }
  throw Error(ErrorCode::kInvalidArgument, std::string("no condition ") + prefix);
}

// min over orthogonal rank-one pairs in dimension 2 of the quasi-monotonicity form,
// scanning v = (cos t, sin t), w = (-sin t, cos t) finely.
double quasi_monotone_min_n2(const AdmissibleParams& p, int steps) {
  const SuperOperator badj = p.B().adjoint();
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < steps; ++k) {
    const double t = std::numbers::pi * k / steps;
    const Vector v = (Vector(2) << std::cos(t), std::sin(t)).finished();
    const Vector w = (Vector(2) << -std::sin(t), std::cos(t)).finished();
    const SymElement u = SymElement::outer(v), x = SymElement::outer(w);
    double val = trace_inner(badj.apply(u), x);
    for (const auto& a : p.mu().atoms) {
      if (!is_small_jump(a.xi.sym())) continue;
      const double n2 = std::pow(hs_norm(a.xi.sym()), 2);
      val -= trace_inner(a.xi.sym(), u) * trace_inner(a.mass.sym(), x) / n2;
    }
    worst = std::min(worst, val);
  }
  return worst;
}

}  // namespace

CriterionResult admissibility_gate(const Options& opt) {
  Report rep(1, "admissibility gate", opt);
  const AdmissibleParams base = load(opt, "ou_n2.json");
  const bool base_ok = base.report().all_pass();
  rep.at_least("bundled ou_n2", "all_pass", base_ok ? 1.0 : 0.0, 1.0);
  const int n = base.dim();
  const SymElement im = small_jump_compensator(base.m(), n);
  constexpr int kRuns = 100;
  constexpr double kTol = 1e-10;

  int caught_ii = 0;
  for (int s = 0; s < kRuns; ++s) {
    RandomStream rng(opt.seed, 0x1100 + s);
    const Vector v = unit_vector(rng, n);
    const SymElement excess = base.b() - im;
    const double along = v.dot(excess.matrix() * v);
    const double depth = 0.05 + 0.45 * rng.uniform();
    const SymElement b = base.b() - (along + depth) * SymElement::outer(v);
    const AdmissibleParams mutated(b, base.B(), base.m(), base.mu());
    const ValidationReport r = validate(mutated, 100, kTol, opt.seed + s);
    if (!verdict(r, "(ii)").pass) ++caught_ii;
  }
  rep.at_least("(ii) mutations", "caught", caught_ii, 99);

  int broken = 0, caught_iv = 0, attempts = 0;
  while (broken < kRuns) {
    RandomStream rng(opt.seed, 0x4400 + attempts);
    const int kind = attempts % 2;
    ++attempts;
    AdmissibleParams mutated;
    if (kind == 0) {
      // Small state-dependent jump with positive mass: penalises every orthogonal pair it sees.
      OperatorMeasure mu;
      ConeElement xi = random_cone(rng, n, 1.0);
      xi = ConeElement(((0.2 + 0.7 * rng.uniform()) / hs_norm(xi.sym())) * xi.sym());
      const Vector w = unit_vector(rng, n);
      mu.atoms.push_back({ConeElement(SymElement((0.1 + 0.5 * rng.uniform()) * SymElement::outer(w))), xi});
      mutated = AdmissibleParams(base.b(), base.B(), base.m(), mu);
    } else {
      // Indefinite rank-one drift perturbation -<y,u><y,x>.
      const Matrix a = random_matrix(rng, n, n, 1.0);
      const SymElement y(Matrix(a + a.transpose()));
      const SymElement yn = (1.0 / hs_norm(y)) * y;
      SuperOperator pert = tensor_square(yn);
      pert *= -(0.2 + 0.8 * rng.uniform());
      mutated = AdmissibleParams(base.b(), base.B() + pert, base.m(), base.mu());
    }
    if (quasi_monotone_min_n2(mutated, 20000) >= -kTol) continue;
    ++broken;
    const ValidationReport r = validate(mutated, 100, kTol, opt.seed + 7919 * attempts);
    if (!verdict(r, "(iv)").pass) ++caught_iv;
  }
  rep.info("(iv) mutations", "attempts", attempts);
  rep.at_least("(iv) mutations", "caught", caught_iv, 99);
  return rep.finish("bundled model " + std::string(base_ok ? "passes" : "FAILS") + "; (ii) caught " +
                    std::to_string(caught_ii) + "/100, (iv) caught " + std::to_string(caught_iv) + "/100");
}

// ---------------------------------------------------------------------------
// 2

CriterionResult riccati_correctness(const Options& opt) {
  Report rep(2, "riccati correctness", opt);
  constexpr double kTol = 1e-11;
  const AdmissibleParams ou = load(opt, "ou_n2.json");
  AdmissibleParams linear(ou.b(), ou.B(), {}, {});
  linear.validate();
  const Matrix badj = linear.compiled().b_adj;
  const std::vector<double> ts{0.5, 1.0, 2.0, 5.0};
  double worst_a = 0.0;
  for (int k = 0; k < 3; ++k) {
    RandomStream rng(opt.seed, 0x2a00 + k);
    const ConeElement u = random_cone(rng, 2, 1.0);
    const RiccatiSolution sol = solve_riccati(linear, u, ts.back(), kTol, ts);
    for (double t : ts) {
      const Vector want = (t * badj).exp() * vec(u.sym());
      const Vector got = vec(sol.psi_at(t));
      const double rel = (got - want).norm() / want.norm();
      worst_a = std::max(worst_a, rel);
      rep.at_most("linear u" + std::to_string(k), "rel_err t=" + fmt(t), rel, 1e-8);
    }
  }

  const AdmissibleParams mu = load(opt, "mu_n2.json");
  const std::vector<double> grid{0.3, 1.0, 2.0};
  double worst_b = 0.0;
  for (int k = 0; k < 3; ++k) {
    RandomStream rng(opt.seed, 0x2b00 + k);
    const ConeElement u = random_cone(rng, 2, 1.0 + k);
    const double un = hs_norm(u.sym());
    for (double t : grid) {
      for (double s : grid) {
        const SymElement direct = solve_riccati(mu, u, t + s, kTol).psi.back().sym();
        const ConeElement mid = solve_riccati(mu, u, s, kTol).psi.back();
        const SymElement chained = solve_riccati(mu, mid, t, kTol).psi.back().sym();
        const double err = hs_norm(direct - chained);
        worst_b = std::max(worst_b, err / un);
        rep.at_most("flow u" + std::to_string(k), "t=" + fmt(t) + " s=" + fmt(s), err, 2e-8 * un);
      }
    }
  }

  const StationaryLaw law(mu, kTol);
  const double m = law.M(), delta = law.delta();
  rep.info("certificate", "M", m);
  rep.info("certificate", "delta", delta);
  double worst_c = -std::numeric_limits<double>::infinity();
  int points = 0;
  for (int k = 0; k < 5; ++k) {
    RandomStream rng(opt.seed, 0x2c00 + k);
    const ConeElement u = random_cone(rng, 2, 0.5 + k);
    const double un = hs_norm(u.sym());
    const RiccatiSolution sol = solve_riccati(mu, u, 10.0 / delta, kTol);
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      // 4 ulp of rounding: at t = 0 the bound is attained exactly when M = 1.
      const double bound = m * std::exp(-delta * sol.times[i]) * un * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
      slack = std::min(slack, bound - hs_norm(sol.psi[i].sym()));
      ++points;
    }
    worst_c = std::max(worst_c, -slack);
    rep.at_least("envelope u" + std::to_string(k), "min(bound - |psi|)", slack, 0.0);
  }
  return rep.finish("(a) max rel err " + fmt(worst_a) + " <= 1e-8; (b) max flow defect/|u| " + fmt(worst_b) +
                    " <= 2e-8; (c) " + std::to_string(points) + " output points, max excess " + fmt(worst_c) +
                    " <= 0");
}

// ---------------------------------------------------------------------------
// 3

CriterionResult transform_vs_simulation(const Options& opt) {
  Report rep(3, "transform vs simulation", opt);
  const std::vector<double> times{0.5, 1.0, 2.0};
  constexpr std::size_t kPaths = 100000;
  std::string summary;
  int idx = 0;
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    const auto t0 = Clock::now();
    const AdmissibleParams p = load(opt, name);
    const StationaryLaw law(p);
    auto sim = make_simulator(p, 0.01 / law.delta());
    const ConeElement x0(SymElement(Matrix((Matrix(2, 2) << 1.5, 0.3, 0.3, 0.8).finished())));
    const auto paths = simulate_paths(*sim, x0, times, opt.seed + idx, kPaths);
    const std::string tag = std::string(name) + "/" + to_string(sim->scheme());
    double worst_z = 0.0;
    for (int k = 0; k < 5; ++k) {
      RandomStream rng(opt.seed, 0x3000 + 16 * idx + k);
      const ConeElement u = random_cone(rng, 2, 0.6);
      const Vector uv = vec(u.sym());
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const McEstimate e =
            mc_estimate(paths, [&](const PathSample& s) { return std::exp(-uv.dot(vec(s.states[ti].sym()))); });
        const double want = laplace_transition(p, x0, u, times[ti], 1e-10);
        worst_z = std::max(worst_z, std::abs(e.mean - want) / e.se);
        rep.near(tag + " u" + std::to_string(k), "laplace t=" + fmt(times[ti]), e.mean, want, 3.0 * e.se);
      }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    rep.log(tag + ": " + fmt(secs) + " s");
    rep.require(secs <= 300.0);
    summary += (idx ? "; " : "") + tag + " max |z| " + fmt(worst_z) + " (" + fmt(secs, 2) + " s)";
    ++idx;
  }
  return rep.finish(summary + "; bound 3 se, <= 300 s per case");
}

// ---------------------------------------------------------------------------
// 4

namespace {

Vector mean_by_quadrature(const AdmissibleParams& p, double horizon) {
  const EffectiveDrift d = effective_drift(p);
  const Matrix state = d.B_hat.matrix().transpose();
  const Vector bhat = vec(d.b_hat);
  const QuadratureRule q = gauss_legendre_graded(horizon, 0.1, 1.25);
  Vector acc = Vector::Zero(bhat.size());
  for (std::size_t i = 0; i < q.size(); ++i) acc += q.weights[i] * ((q.nodes[i] * state).exp() * bhat);
  return acc;
}

// z z^T + int e^{sD} (sum_m w xi xi^T) e^{sD^T} ds + double integral of the mu-atom rates
// along the mean path, D the state drift.
Matrix second_moment_by_quadrature(const AdmissibleParams& p, double horizon) {
  const EffectiveDrift d = effective_drift(p);
  const Matrix bh = d.B_hat.matrix();
  const Matrix state = bh.transpose();
  const Vector z = mean_by_quadrature(p, horizon);
  const Vector bhat = vec(d.b_hat);
  const CompiledParams& c = p.compiled();
  Matrix acc = z * z.transpose();
  const QuadratureRule outer = gauss_legendre_graded(horizon, 0.1, 1.25);
  for (std::size_t i = 0; i < outer.size(); ++i) {
    const double s = outer.nodes[i];
    const Matrix es = (s * state).exp();
    for (const auto& a : c.m) {
      const Vector y = es * a.xi;
      acc += outer.weights[i] * a.w * (y * y.transpose());
    }
    if (c.mu.empty()) continue;
    const QuadratureRule inner = gauss_legendre_panels(0.0, s, std::max(1, static_cast<int>(std::ceil(s))));
    for (std::size_t j = 0; j < inner.size(); ++j) {
      const double u = inner.nodes[j];
      const Matrix eu = (u * state).exp();
      const Matrix ev = ((s - u) * bh).exp();
      for (const auto& a : c.mu) {
        const Vector y = eu * a.xi;
        const double rate = bhat.dot(ev * a.mass) / a.norm2;
        acc += outer.weights[i] * inner.weights[j] * rate * (y * y.transpose());
      }
    }
  }
  return acc;
}

}  // namespace

CriterionResult moment_formulas(const Options& opt) {
  Report rep(4, "moment formulas", opt);
  constexpr std::size_t kSamples = 40000;
  double worst_rel = 0.0, worst_z = 0.0;
  int idx = 0;
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    const AdmissibleParams p = load(opt, name);
    const StationaryLaw law(p, 1e-10);
    const double horizon = 40.0 / law.delta();
    const Vector z = vec(mean_invariant(p));
    const Vector zq = mean_by_quadrature(p, horizon);
    const double rel_mean = (z - zq).norm() / zq.norm();
    const Matrix s = second_moment_invariant(p, 1e-10).matrix();
    const Matrix sq = second_moment_by_quadrature(p, horizon);
    const double rel_second = (s - sq).norm() / sq.norm();
    worst_rel = std::max({worst_rel, rel_mean, rel_second});
    rep.at_most(name, "mean rel err vs quadrature", rel_mean, 1e-6);
    rep.at_most(name, "second moment rel err vs quadrature", rel_second, 1e-6);

    const StationarySample ss = stationary_sampler(p, 10.0 / law.delta(), 0.0, kSamples, opt.seed + 40 + idx);
    std::vector<Vector> xs;
    xs.reserve(ss.samples.size());
    for (const auto& x : ss.samples) xs.push_back(vec(x.sym()));
    const int big_n = static_cast<int>(z.size());
    for (int i = 0; i < big_n; ++i) {
      const McEstimate e = mc_estimate(xs, [i](const Vector& v) { return v(i); });
      worst_z = std::max(worst_z, std::abs(e.mean - z(i)) / e.se);
      rep.near(name, "mean[" + std::to_string(i) + "] vs long run", e.mean, z(i), 3.0 * e.se);
      for (int j = i; j < big_n; ++j) {
        const McEstimate f = mc_estimate(xs, [i, j](const Vector& v) { return v(i) * v(j); });
        worst_z = std::max(worst_z, std::abs(f.mean - s(i, j)) / f.se);
        rep.near(name, "second[" + std::to_string(i) + "," + std::to_string(j) + "] vs long run", f.mean, s(i, j),
                 3.0 * f.se);
      }
    }
    ++idx;
  }
  return rep.finish("(a) max rel err " + fmt(worst_rel) + " <= 1e-6; (b) max |z| " + fmt(worst_z) +
                    " <= 3 over " + std::to_string(kSamples) + " long-run samples");
}

// ---------------------------------------------------------------------------
// 5

CriterionResult invariance_fixed_point(const Options& opt) {
  Report rep(5, "invariance fixed point", opt);
  double worst = 0.0;
  int idx = 0;
  for (const char* name : {"ou_n2.json", "mu_n2.json"}) {
    const StationaryLaw law(load(opt, name), 1e-10);
    for (int k = 0; k < 5; ++k) {
      RandomStream rng(opt.seed, 0x5000 + 16 * idx + k);
      const ConeElement u = random_cone(rng, 2, 0.8);
      for (double t : {0.5, 1.0, 2.0, 5.0}) {
        const double r = invariance_residual(law, u, t);
        worst = std::max(worst, r);
        rep.at_most(std::string(name) + " u" + std::to_string(k), "residual t=" + fmt(t), r, 1e-7);
      }
    }
    ++idx;
  }
  return rep.finish("max residual " + fmt(worst) + " <= 1e-7");
}

// ---------------------------------------------------------------------------
// 6

CriterionResult wasserstein_decay(const Options& opt) {
  Report rep(6, "wasserstein decay", opt);
  const AdmissibleParams p = load(opt, "ou_n2.json");
  const StationaryLaw law(p);
  const ConeElement x0(20.0 * SymElement::identity(2));
  const std::vector<double> times{0.5, 1.0, 2.0, 4.0};
  constexpr std::size_t kPaths = 1024;
  constexpr int kBoot = 20;
  const Cloud pi = to_cloud(stationary_sampler(p, 10.0 / law.delta(), 0.0, kPaths, opt.seed + 60).samples);
  auto sim = make_simulator(p, 0.01 / law.delta());
  const auto paths = simulate_paths(*sim, x0, times, opt.seed + 61, kPaths);
  std::vector<double> dist;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    std::vector<ConeElement> xs;
    for (const auto& path : paths) xs.push_back(path.states[ti]);
    const TransportResult r = wp_exact(to_cloud(xs), pi, 2.0, kBoot, opt.seed + 62 + ti);
    const double bound = wasserstein_bound(law, x0, 2.0, times[ti]);
    dist.push_back(r.distance);
    worst_margin = std::min(worst_margin, bound + 3.0 * r.bootstrap_se - r.distance);
    rep.info("t=" + fmt(times[ti]), "bootstrap_se", r.bootstrap_se);
    rep.at_most("t=" + fmt(times[ti]), "W2 vs bound + 3 se", r.distance, bound + 3.0 * r.bootstrap_se);
    rep.log("t=" + fmt(times[ti]) + " W2 " + fmt(r.distance) + " bound " + fmt(bound));
  }
  const DecayFit fit = decay_fit(times, dist);
  rep.info("fit", "r_squared", fit.r_squared);
  rep.at_least("fit", "rate", fit.rate, 0.5 * law.delta() - 0.1);
  return rep.finish("min(bound + 3 se - W2) " + fmt(worst_margin) + " >= 0; decay rate " + fmt(fit.rate) +
                    " >= delta/2 - 0.1 = " + fmt(0.5 * law.delta() - 0.1));
}

// ---------------------------------------------------------------------------
// 7

CriterionResult convolution_inequality(const Options& opt) {
  Report rep(7, "convolution inequality", opt);
  constexpr int kTrials = 100;
  constexpr std::size_t kPoints = 256;
  int passes = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    RandomStream rng(opt.seed, 0x7000 + trial);
    const double shift = 0.5 * rng.uniform();
    Cloud rho, mu, nu;
    for (std::size_t i = 0; i < kPoints; ++i) {
      rho.push_back(vec(random_cone(rng, 2, 0.7).sym()));
      mu.push_back(vec(random_cone(rng, 2, 0.5).sym()));
      nu.push_back(vec(random_cone(rng, 2, 0.6).sym() + shift * SymElement::identity(2)));
    }
    const ConvolutionCheck c = convolution_check(rho, mu, nu, 20, opt.seed + trial);
    passes += c.pass ? 1 : 0;
    rep.info("trial " + std::to_string(trial), "lhs - rhs", c.lhs - c.rhs);
    rep.info("trial " + std::to_string(trial), "se", c.se);
  }
  rep.at_least("all trials", "passes", passes, 95);
  return rep.finish(std::to_string(passes) + "/100 trials pass (need >= 95)");
}

// ---------------------------------------------------------------------------
// 8

CriterionResult joint_transform_consistency(const Options& opt) {
  Report rep(8, "joint transform consistency", opt);
  const PricingModel desk = load_desk(opt);
  const JointModelSpec& spec = desk.spec;
  const StationaryLaw law(spec.x_params, 1e-10);
  const int big_n = spec.x_params.compiled().big_n;

  double spread_max = 0.0;
  for (int k = 0; k < 5; ++k) {
    RandomStream rng(opt.seed, 0x8000 + k);
    const ConeElement u = random_cone(rng, 2, 0.6);
    const CVector u2 = vec(u.sym()).cast<cd>();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double t : {0.5, 1.0, 2.0, 5.0}) {
      const cd v = joint_transform(spec, Regime::invariant(), CVector::Zero(spec.dim_h), u2, t, 1e-10, &law);
      lo = std::min(lo, v.real());
      hi = std::max(hi, v.real());
      rep.at_most("stationary u" + std::to_string(k), "|Im| t=" + fmt(t), std::abs(v.imag()), 1e-7);
    }
    spread_max = std::max(spread_max, hi - lo);
    rep.at_most("stationary u" + std::to_string(k), "t spread", hi - lo, 1e-7);
  }

  // BNS-shaped model: same X, loading and shift generator, no affine drift.
  const JointModelSpec bns = JointModelSpec::with_loading(spec.A, Vector::Zero(spec.dim_h),
                                                          Matrix::Zero(spec.dim_h, big_n), spec.lambda, spec.x_params);
  double bns_max = 0.0;
  const ConeElement x0 = desk.start.x0;
  for (int k = 0; k < 3; ++k) {
    RandomStream rng(opt.seed, 0x8100 + k);
    const Vector w = random_matrix(rng, spec.dim_h, 1, 1.0).col(0);
    const CVector u1 = cd(0.0, 1.0) * w.cast<cd>();
    const CVector u2 = vec(random_cone(rng, 2, 0.5).sym()).cast<cd>();
    for (double t : {0.5, 1.0, 2.0}) {
      const cd a = bns_transform(bns, u1, u2, t, false, x0);
      const cd b = joint_transform(bns, Regime::point(x0), u1, u2, t, 1e-10);
      const cd c = bns_transform(bns, u1, u2, t, true, std::nullopt, &law);
      const cd d = joint_transform(bns, Regime::invariant(), u1, u2, t, 1e-10, &law);
      bns_max = std::max({bns_max, std::abs(a - b), std::abs(c - d)});
      rep.at_most("bns k" + std::to_string(k), "point |diff| t=" + fmt(t), std::abs(a - b), 1e-7);
      rep.at_most("bns k" + std::to_string(k), "stationary |diff| t=" + fmt(t), std::abs(c - d), 1e-7);
    }
  }

  constexpr std::size_t kPaths = 100000;
  const Vector w = (Vector(3) << 0.8, -0.5, 0.3).finished();
  const SymElement u2 = 0.3 * SymElement::identity(2);
  const double t = 1.0;
  JointSimOptions so;
  so.dt = 0.01;
  so.x_dt_max = 0.01;
  double worst_z = 0.0;
  int idx = 0;
  for (const Regime& reg : {Regime::point(x0), Regime::invariant()}) {
    const cd want = joint_transform(spec, reg, cd(0.0, 1.0) * w.cast<cd>(), vec(u2).cast<cd>(), t, 1e-10, &law);
    const JointPaths jp = simulate_joint(spec, reg, {t}, opt.seed + 80 + idx, kPaths, so);
    std::vector<cd> vals(jp.y.size());
    for (std::size_t k = 0; k < vals.size(); ++k) {
      vals[k] = std::exp(cd(0.0, w.dot(jp.y[k][0])) - vec(u2).dot(jp.x[k][0]));
    }
    const McEstimate re = mc_estimate(vals, [](cd v) { return v.real(); });
    const McEstimate im = mc_estimate(vals, [](cd v) { return v.imag(); });
    const std::string tag = reg.stationary ? "mc stationary" : "mc point";
    worst_z = std::max({worst_z, std::abs(re.mean - want.real()) / re.se, std::abs(im.mean - want.imag()) / im.se});
    rep.near(tag, "Re", re.mean, want.real(), 3.0 * re.se);
    rep.near(tag, "Im", im.mean, want.imag(), 3.0 * im.se);
    ++idx;
  }
  return rep.finish("stationary t-spread " + fmt(spread_max) + " <= 1e-7; BNS vs Riccati " + fmt(bns_max) +
                    " <= 1e-7; empirical max |z| " + fmt(worst_z) + " <= 3");
}

// ---------------------------------------------------------------------------
// 9

CriterionResult pricing_cross_validation(const Options& opt) {
  Report rep(9, "pricing cross-validation", opt);
  const PricingModel desk = load_desk(opt);
  const double t = 0.5, th = 1.5;
  const std::vector<double> ks{0.8, 0.9, 1.0, 1.1, 1.25};
  PricingOptions po;
  po.n_paths = 200000;
  po.seed = opt.seed + 90;
  po.sim.dt = 0.01;
  po.sim.x_dt_max = 0.01;
  const Vector e = desk.space.eval_vector(th - t);
  const StationaryLaw law(desk.spec.x_params, 1e-10);
  double worst_z = 0.0, worst_rt = 0.0;
  for (const Regime& reg : {desk.start, Regime::invariant()}) {
    const std::string tag = reg.stationary ? "stationary" : "point";
    const auto f = price_call_on_forward(desk, t, th, ks, reg, PricingMethod::kFourier, po);
    const auto mc = price_call_on_forward(desk, t, th, ks, reg, PricingMethod::kMonteCarlo, po);
    const double fwd = joint_transform(desk.spec, reg, e.cast<cd>(), CVector::Zero(3), t, 1e-10, &law).real();
    rep.info(tag, "forward mean", fwd);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      rep.require(f[i].method == PricingMethod::kFourier && !f[i].fallback);
      worst_z = std::max(worst_z, std::abs(f[i].price - mc[i].price) / mc[i].se);
      rep.near(tag + " K=" + fmt(ks[i]), "fourier vs mc", f[i].price, mc[i].price, 3.0 * mc[i].se);
      const double iv = implied_vol(f[i].price, fwd, ks[i], t, 0.0);
      const double back = implied_vol(black76_call(fwd, ks[i], t, 0.0, iv), fwd, ks[i], t, 0.0);
      worst_rt = std::max(worst_rt, std::abs(back - iv));
      rep.info(tag + " K=" + fmt(ks[i]), "implied vol", iv);
      rep.at_most(tag + " K=" + fmt(ks[i]), "iv roundtrip", std::abs(back - iv), 1e-8);
    }
  }
  return rep.finish("max |fourier - mc|/se " + fmt(worst_z) + " <= 3 (2e5 paths, 5 strikes, 2 regimes); iv roundtrip " +
                    fmt(worst_rt) + " <= 1e-8");
}

// ---------------------------------------------------------------------------
// 10

CriterionResult smile_convergence_check(const Options& opt) {
  Report rep(10, "smile convergence", opt);
  const PricingModel desk = load_desk(opt);
  const StationaryLaw law(desk.spec.x_params, 1e-10);
  const double delta = law.delta();
  rep.near("model", "delta", delta, 1.0, 0.05);
  std::vector<double> taus;
  for (double c : {1.0, 2.0, 4.0, 8.0}) taus.push_back(c / delta);
  const std::vector<double> ks{-0.2, -0.1, 0.0, 0.1, 0.2};
  PricingOptions po;
  po.n_outer = 4000;
  po.seed = opt.seed + 100;
  po.sim.x_dt_max = 0.01;
  const SmileTable tab = smile_convergence(desk, taus, 0.5, 1.5, ks, po);
  double worst = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    for (std::size_t k = 0; k < ks.size(); ++k) {
      const SmileRow& row = tab.at(i, k);
      rep.info("tau=" + fmt(row.tau) + " k=" + fmt(ks[k]), "implied vol", row.implied_vol);
      rep.info("tau=" + fmt(row.tau) + " k=" + fmt(ks[k]), "se", row.se);
      rep.require(row.implied_vol > 0.0);
    }
  }
  for (std::size_t k = 0; k < ks.size(); ++k) {
    rep.info("limit k=" + fmt(ks[k]), "implied vol", tab.limit(k).implied_vol);
    const std::size_t last = taus.size() - 1;
    const double d = tab.discrepancy(last, k);
    worst = std::max(worst, d);
    rep.at_most("tau=8/delta k=" + fmt(ks[k]), "|sigma - sigma_limit|", d, std::max(0.005, 3.0 * tab.at(last, k).se));
  }
  const bool mono = tab.monotone(3.0);
  rep.at_least("all strikes", "discrepancy nonincreasing in tau (3 se)", mono ? 1.0 : 0.0, 1.0);
  return rep.finish("delta " + fmt(delta) + "; max discrepancy at tau=8/delta " + fmt(worst) +
                    " <= max(0.005, 3 se); monotone " + (mono ? "yes" : "NO"));
}

// ---------------------------------------------------------------------------

std::vector<Criterion> numbered_criteria() {
  return {admissibility_gate,       riccati_correctness,     transform_vs_simulation, moment_formulas,
          invariance_fixed_point,   wasserstein_decay,       convolution_inequality,       joint_transform_consistency,
          pricing_cross_validation, smile_convergence_check};
}

CriterionResult reproducibility(const Options& opt, const std::vector<CriterionResult>& first) {
  Report rep(11, "reproducibility", opt);
  const auto crit = numbered_criteria();
  int mismatched = 0;
  for (std::size_t alt = 1; alt < opt.threads_alt.size(); ++alt) {
    const int threads = opt.threads_alt[alt];
    set_thread_count(threads);
    for (std::size_t i = 0; i < crit.size() && i < first.size(); ++i) {
      rep.log("rerun " + std::to_string(first[i].id) + " with " + std::to_string(threads) + " threads");
      const CriterionResult again = crit[i](opt);
      const bool same = again.artifact == first[i].artifact;
      mismatched += same ? 0 : 1;
      rep.at_least("criterion " + std::to_string(first[i].id), "identical at " + std::to_string(threads) + " threads",
                   same ? 1.0 : 0.0, 1.0);
      rep.info("criterion " + std::to_string(first[i].id), "artifact fnv1a64 low32",
               static_cast<double>(fnv1a64(first[i].artifact) & 0xffffffffu));
    }
  }
  set_thread_count(opt.threads_alt.empty() ? opt.threads : opt.threads_alt.front());
  std::string counts;
  for (int t : opt.threads_alt) counts += (counts.empty() ? "" : ",") + std::to_string(t);
  return rep.finish(std::to_string(first.size() - static_cast<std::size_t>(mismatched)) + "/" +
                    std::to_string(first.size()) + " artifacts byte-identical across reruns at threads {" + counts +
                    "}");
}

std::vector<CriterionResult> run_all(const Options& opt, const std::function<void(const CriterionResult&)>& on_result) {
  set_thread_count(opt.threads_alt.empty() ? opt.threads : opt.threads_alt.front());
  std::vector<CriterionResult> out;
  auto guarded = [&](int id, const std::function<CriterionResult()>& f) {
    CriterionResult r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r.id = id;
      r.title = "criterion " + std::to_string(id);
      r.pass = false;
      r.summary = std::string("error: ") + e.what();
    }
    if (on_result) on_result(r);
    return r;
  };
  const auto crit = numbered_criteria();
  for (std::size_t i = 0; i < crit.size(); ++i) {
    out.push_back(guarded(static_cast<int>(i) + 1, [&] { return crit[i](opt); }));
  }
  out.push_back(guarded(11, [&] { return reproducibility(opt, out); }));
  return out;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.pass ? "PASS" : "FAIL") << "  " << (r.id < 10 ? " " : "") << r.id << "  " << r.title << ": " << r.summary
    << "  [" << fmt(r.seconds, 3) << " s]";
  return s.str();
}

}  // namespace affine::acceptance
