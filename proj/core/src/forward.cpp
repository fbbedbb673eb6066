#include "affine/forward.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "affine/parallel.hpp"
#include "affine/quadrature.hpp"

namespace affine {

using cd = std::complex<double>;

double kernel_eval(double beta, double s, double t) {
  require(beta > 0.0, ErrorCode::kInvalidArgument, "beta must be positive");
  require(s >= 0.0 && t >= 0.0, ErrorCode::kInvalidArgument, "kernel arguments must be >= 0");
  return 1.0 - std::expm1(-beta * std::min(s, t)) / beta;
}

FilipovicSpace::FilipovicSpace(double beta, std::vector<double> anchors)
    : beta_(beta), anchors_(std::move(anchors)) {
  require(beta_ > 0.0, ErrorCode::kInvalidArgument, "beta must be positive");
  require(!anchors_.empty() && anchors_.front() == 0.0, ErrorCode::kInvalidArgument,
          "anchors must start at 0");
  for (std::size_t i = 1; i < anchors_.size(); ++i) {
    require(anchors_[i] > anchors_[i - 1], ErrorCode::kInvalidArgument,
            "anchors must increase strictly");
  }
  const int d = dim();
  gram_.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) gram_(i, j) = kernel_eval(beta_, anchors_[i], anchors_[j]);
  }
  Eigen::LLT<Matrix> llt(gram_);
  require(llt.info() == Eigen::Success, ErrorCode::kInvalidArgument,
          "Gram matrix is not positive definite");
  chol_ = llt.matrixL();
}

FilipovicSpace FilipovicSpace::uniform(double beta, double x_max, int d) {
  require(d >= 2 && x_max > 0.0, ErrorCode::kInvalidArgument, "uniform grid needs d >= 2");
  std::vector<double> a(d);
  for (int j = 0; j < d; ++j) a[j] = x_max * j / (d - 1);
  return FilipovicSpace(beta, std::move(a));
}

Vector FilipovicSpace::kernel_vector(double t) const {
  Vector k(dim());
  for (int j = 0; j < dim(); ++j) k(j) = kernel_eval(beta_, t, anchors_[j]);
  return k;
}

Vector FilipovicSpace::eval_vector(double t) const {
  return chol_.triangularView<Eigen::Lower>().solve(kernel_vector(t));
}

Vector FilipovicSpace::coords_from_values(const Vector& values) const {
  require(values.size() == dim(), ErrorCode::kDimensionMismatch, "one value per anchor");
  return chol_.triangularView<Eigen::Lower>().solve(values);
}

Matrix FilipovicSpace::shift_adjoint_generator() const {
  const int d = dim();
  Matrix w = Matrix::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < a; ++b) w(a, b) = std::exp(-beta_ * anchors_[b]);
  }
  const auto l = chol_.triangularView<Eigen::Lower>();
  const Matrix lw = l.solve(w);
  return l.solve(lw.transpose()).transpose();
}

ShiftMatrix shift_matrix(const FilipovicSpace& space, double tau) {
  require(tau >= 0.0, ErrorCode::kInvalidArgument, "tau must be nonnegative");
  const int d = space.dim();
  Matrix shifted(d, d);
  for (int j = 0; j < d; ++j) shifted.col(j) = space.eval_vector(space.anchors()[j] + tau);
  // E = L^T, so S = E_tau E^{-1} = E_tau L^{-T}.
  const Matrix s =
      space.cholesky().triangularView<Eigen::Lower>().solve(shifted.transpose()).transpose();
  ShiftMatrix out{s, 0.0};
  const auto& x = space.anchors();
  constexpr int kRefine = 8;
  for (int j = 0; j + 1 < d; ++j) {
    for (int r = 0; r < kRefine; ++r) {
      const double t = x[j] + (x[j + 1] - x[j]) * r / kRefine;
      const double err = (s * space.eval_vector(t) - space.eval_vector(t + tau)).norm();
      out.projection_error = std::max(out.projection_error, err);
    }
  }
  return out;
}

double forward_price(const FilipovicSpace& space, const ForwardCurve& y, double T, double T_hat) {
  require(T >= 0.0 && T <= T_hat, ErrorCode::kInvalidArgument, "need 0 <= T <= T_hat");
  require(y.coords.size() == space.dim(), ErrorCode::kDimensionMismatch,
          "curve has the wrong dimension");
  return std::exp(y.value(space, T_hat - T));
}

namespace {
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
}  // namespace

double black76_call(double F, double K, double T, double r, double sigma) {
  require(F > 0.0 && K > 0.0, ErrorCode::kInvalidArgument, "F and K must be positive");
  require(T >= 0.0 && sigma >= 0.0, ErrorCode::kInvalidArgument, "T and sigma must be >= 0");
  const double df = std::exp(-r * T);
  const double sd = sigma * std::sqrt(T);
  if (sd <= 0.0) return df * std::max(F - K, 0.0);
  const double d1 = (std::log(F / K) + 0.5 * sd * sd) / sd;
  return df * (F * norm_cdf(d1) - K * norm_cdf(d1 - sd));
}

double implied_vol(double price, double F, double K, double T, double r) {
  require(F > 0.0 && K > 0.0 && T > 0.0, ErrorCode::kInvalidArgument,
          "implied_vol needs F, K, T > 0");
  const double df = std::exp(-r * T);
  const double lo_price = df * std::max(F - K, 0.0);
  const double hi_price = df * F;
  if (!(price > lo_price && price < hi_price)) {
    throw Error(ErrorCode::kPriceOutOfBounds, "price outside the no-arbitrage interval");
  }
  const auto f = [&](double s) { return black76_call(F, K, T, r, s) - price; };
  double hi = 1.0;
  while (f(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e4) throw Error(ErrorCode::kNonConvergence, "implied vol above 1e4");
  }
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, 0.0, hi, f(0.0), f(hi), boost::math::tools::eps_tolerance<double>(52), iters);
  const double s = 0.5 * (a + b);
  require(std::abs(f(s)) <= 1e-10 * std::max(1.0, price), ErrorCode::kNonConvergence,
          "implied vol did not converge");
  return s;
}

double implied_forward_vol(double price, double log_strike, double T, double r) {
  return implied_vol(price, std::exp(r * T), std::exp(log_strike + r * T), T, r);
}

Matrix risk_neutral_gamma(const FilipovicSpace& space, const Matrix& lambda) {
  const int d = space.dim();
  require(lambda.rows() == d, ErrorCode::kDimensionMismatch, "loading must have dim_h rows");
  const int n = static_cast<int>(lambda.cols());
  const Matrix e = space.evaluator_matrix();
  Matrix v(d, sym_dim(n));
  for (int j = 0; j < d; ++j) {
    const Vector h = lambda.transpose() * e.col(j);
    v.row(j) = vec(SymElement(Matrix(h * h.transpose()))).transpose();
  }
  // E^T Gamma = -V / 2 with E^T = L.
  return -0.5 * space.cholesky().triangularView<Eigen::Lower>().solve(v);
}

JointModelSpec forward_curve_model(const FilipovicSpace& space, const Matrix& lambda,
                                   AdmissibleParams x_params) {
  return JointModelSpec::with_loading(space.shift_generator(), Vector::Zero(space.dim()),
                                      risk_neutral_gamma(space, lambda), lambda,
                                      std::move(x_params));
}

const char* to_string(PricingMethod m) noexcept {
  return m == PricingMethod::kFourier ? "fourier" : "mc";
}

FourierEngine::FourierEngine(const PricingModel& model, double T, double T_hat,
                             const PricingOptions& opt)
    : model_(&model), T_(T), T_hat_(T_hat), opt_(opt) {
  require(T > 0.0 && T <= T_hat, ErrorCode::kInvalidArgument, "need 0 < T <= T_hat");
  require(model.space.dim() == model.spec.dim_h, ErrorCode::kDimensionMismatch,
          "curve space and model dimensions differ");
  e_ = model.space.eval_vector(T_hat - T);
  double alpha = opt.alpha;
  for (int attempt = 0;; ++attempt) {
    try {
      build(alpha);
      return;
    } catch (const Error& err) {
      const bool retry = err.code() == ErrorCode::kDomainBlowup ||
                         err.code() == ErrorCode::kStepSizeUnderflow;
      if (!retry || attempt >= opt.max_alpha_halvings) throw;
      alpha *= 0.5;
    }
  }
}

void FourierEngine::build(double alpha) {
  alpha_ = alpha;
  v_.clear();
  w_.clear();
  phi_.clear();
  denom_.clear();
  psi1_.clear();
  psi2_.clear();
  stationary_.clear();
  const JointModelSpec& spec = model_->spec;
  const int big_n = spec.x_params.compiled().big_n;
  const CVector u2 = CVector::Zero(big_n);
  double ref = 0.0;
  for (double a = 0.0; a < opt_.v_max; a += opt_.panel_width) {
    QuadratureRule q;
    q.append_panel(a, a + opt_.panel_width);
    const std::size_t m = q.size();
    std::vector<cd> phi(m);
    std::vector<CVector> p1(m), p2(m);
    parallel_for(
        m,
        [&](std::size_t i) {
          const CVector u1 = cd(alpha + 1.0, q.nodes[i]) * e_.cast<cd>();
          const JointRiccatiPath path = joint_riccati(spec, u1, u2, T_, opt_.tol);
          phi[i] = path.Phi.back();
          p1[i] = path.psi1.back();
          p2[i] = path.psi2.back();
        },
        opt_.threads);
    double panel_max = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = q.nodes[i];
      const cd den(alpha * alpha + alpha - v * v, v * (2.0 * alpha + 1.0));
      require(std::isfinite(std::abs(phi[i])), ErrorCode::kDomainBlowup, "non-finite exponent");
      const double mag = std::exp(-phi[i].real()) / std::abs(den);
      panel_max = std::max(panel_max, mag);
      v_.push_back(v);
      w_.push_back(q.weights[i]);
      phi_.push_back(phi[i]);
      denom_.push_back(den);
      psi1_.push_back(std::move(p1[i]));
      psi2_.push_back(std::move(p2[i]));
    }
    if (a == 0.0) ref = panel_max;
    if (panel_max <= opt_.trunc_eps * ref) break;
  }
}

std::vector<double> FourierEngine::invert(const std::vector<cd>& chi,
                                          const std::vector<double>& ks) const {
  std::vector<double> out(ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j) {
    const double k = ks[j];
    double s = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) {
      const cd term = std::exp(cd(0.0, -v_[i] * k)) * chi[i] / denom_[i];
      s += w_[i] * term.real();
    }
    out[j] = std::exp(-alpha_ * k) / std::numbers::pi * s;
  }
  return out;
}

std::vector<double> FourierEngine::call_point(const ConeElement& x, const Vector& y0,
                                              const std::vector<double>& ks) const {
  const CVector xv = vec(x.sym()).cast<cd>();
  const bool has_y = y0.size() > 0;
  std::vector<cd> chi(v_.size());
  for (std::size_t i = 0; i < v_.size(); ++i) {
    cd expo = -phi_[i] - xv.dot(psi2_[i]);
    if (has_y) expo += y0.cast<cd>().dot(psi1_[i]);
    chi[i] = std::exp(expo);
  }
  return invert(chi, ks);
}

double FourierEngine::call_point(const ConeElement& x, const Vector& y0, double k) const {
  return call_point(x, y0, std::vector<double>{k}).front();
}

std::vector<double> FourierEngine::call_stationary(const std::vector<double>& ks) const {
  if (stationary_.empty()) {
    if (!law_) law_.emplace(model_->spec.x_params, opt_.tol);
    std::vector<cd> chi(v_.size());
    parallel_for(
        v_.size(),
        [&](std::size_t i) { chi[i] = std::exp(-phi_[i]) * law_->laplace_vec(psi2_[i]); },
        opt_.threads);
    stationary_ = std::move(chi);
  }
  return invert(stationary_, ks);
}

double FourierEngine::call_stationary(double k) const {
  return call_stationary(std::vector<double>{k}).front();
}

namespace {

std::vector<PriceResult> price_mc(const PricingModel& model, double T, double T_hat,
                                  const std::vector<double>& K, const Regime& regime,
                                  const PricingOptions& opt) {
  JointSimOptions so = opt.sim;
  so.threads = opt.threads;
  const JointPaths paths = simulate_joint(model.spec, regime, {T}, opt.seed, opt.n_paths, so);
  const Vector e = model.space.eval_vector(T_hat - T);
  std::vector<double> logf(paths.y.size());
  for (std::size_t p = 0; p < paths.y.size(); ++p) logf[p] = paths.y[p].back().dot(e);
  std::vector<PriceResult> out;
  for (double k : K) {
    const McEstimate est =
        mc_estimate(logf, [k](double lf) { return std::max(std::exp(lf) - k, 0.0); });
    out.push_back({est.mean, est.se, PricingMethod::kMonteCarlo, 0.0, false});
  }
  return out;
}

}  // namespace

std::vector<PriceResult> price_call_on_forward(const PricingModel& model, double T, double T_hat,
                                               const std::vector<double>& K,
                                               const Regime& regime, PricingMethod method,
                                               const PricingOptions& opt) {
  require(T >= 0.0 && T <= T_hat, ErrorCode::kInvalidArgument, "need 0 <= T <= T_hat");
  for (double k : K) require(k > 0.0, ErrorCode::kInvalidArgument, "strikes must be positive");
  if (T == 0.0) {
    const Vector y0 = regime.stationary || regime.y0.size() == 0
                          ? Vector(Vector::Zero(model.spec.dim_h))
                          : regime.y0;
    const double f = std::exp(y0.dot(model.space.eval_vector(T_hat)));
    std::vector<PriceResult> out;
    for (double k : K) out.push_back({std::max(f - k, 0.0), 0.0, method, 0.0, false});
    return out;
  }
  if (method == PricingMethod::kMonteCarlo) return price_mc(model, T, T_hat, K, regime, opt);
  std::optional<FourierEngine> engine;
  try {
    engine.emplace(model, T, T_hat, opt);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::kDomainBlowup && err.code() != ErrorCode::kStepSizeUnderflow) {
      throw;
    }
    auto out = price_mc(model, T, T_hat, K, regime, opt);
    for (auto& r : out) r.fallback = true;
    return out;
  }
  std::vector<double> ks;
  for (double k : K) ks.push_back(std::log(k));
  const std::vector<double> prices =
      regime.stationary ? engine->call_stationary(ks) : engine->call_point(regime.x0, regime.y0, ks);
  std::vector<PriceResult> out;
  for (double p : prices) out.push_back({p, 0.0, PricingMethod::kFourier, engine->alpha(), false});
  return out;
}

PriceResult price_call_on_forward(const PricingModel& model, double T, double T_hat, double K,
                                  const Regime& regime, PricingMethod method,
                                  const PricingOptions& opt) {
  return price_call_on_forward(model, T, T_hat, std::vector<double>{K}, regime, method, opt)
      .front();
}

std::vector<ForwardStartResult> price_forward_start(const PricingModel& model, double tau,
                                                    double T, double T_hat,
                                                    const std::vector<double>& log_strikes,
                                                    const PricingOptions& opt) {
  require(tau >= 0.0 && T >= 0.0 && T <= T_hat, ErrorCode::kInvalidArgument,
          "need tau >= 0 and 0 <= T <= T_hat");
  const std::size_t nk = log_strikes.size();
  std::vector<ForwardStartResult> out(nk);
  const Matrix a_adj = model.spec.A.transpose();
  const Vector e = model.space.eval_vector(T_hat - T);
  const Vector shifted = (T * a_adj).exp() * e;
  const double defect = (shifted - model.space.eval_vector(T_hat)).norm();
  for (auto& r : out) r.shift_defect = defect;
  if (T == 0.0) {
    for (std::size_t j = 0; j < nk; ++j) out[j].price = std::max(1.0 - std::exp(log_strikes[j]), 0.0);
    return out;
  }

  const FourierEngine engine(model, T, T_hat, opt);
  const Regime& start = model.start;
  std::vector<ConeElement> draws;
  if (start.stationary) {
    const StationaryLaw law(model.spec.x_params, opt.tol);
    StationarySamplerOptions so;
    so.threads = opt.threads;
    so.dt_max = opt.sim.x_dt_max;
    draws = stationary_sampler(model.spec.x_params, 10.0 / law.delta(), 0.0, opt.n_outer, opt.seed,
                               so)
                .samples;
  } else if (tau == 0.0) {
    draws.push_back(start.x0);
  } else {
    auto sim = make_simulator(model.spec.x_params, opt.sim.x_dt_max);
    sim->prepare({tau});
    draws.resize(opt.n_outer);
    parallel_for(
        opt.n_outer,
        [&](std::size_t i) { draws[i] = run_path(*sim, start.x0, {tau}, opt.seed, i).states[0]; },
        opt.threads);
  }
  std::vector<std::vector<double>> cond(draws.size());
  const Vector y_zero;
  parallel_for(
      draws.size(), [&](std::size_t i) { cond[i] = engine.call_point(draws[i], y_zero, log_strikes); },
      opt.threads);
  for (std::size_t j = 0; j < nk; ++j) {
    const McEstimate est = mc_estimate(cond, [j](const std::vector<double>& c) { return c[j]; });
    out[j].price = est.mean;
    out[j].se = est.se;
  }

  if (opt.n_nested > 0) {
    JointSimOptions so = opt.sim;
    so.threads = opt.threads;
    const TimeGrid grid = tau > 0.0 ? TimeGrid{tau, tau + T} : TimeGrid{0.0, T};
    const JointPaths paths =
        simulate_joint(model.spec, start, grid, opt.seed ^ 0x6e57ed5eedULL, opt.n_nested, so);
    std::vector<double> logr(paths.y.size());
    for (std::size_t p = 0; p < paths.y.size(); ++p) {
      logr[p] = paths.y[p][1].dot(e) - paths.y[p][0].dot(shifted);
    }
    for (std::size_t j = 0; j < nk; ++j) {
      const double strike = std::exp(log_strikes[j]);
      const McEstimate est =
          mc_estimate(logr, [strike](double lr) { return std::max(std::exp(lr) - strike, 0.0); });
      out[j].nested_price = est.mean;
      out[j].nested_se = est.se;
    }
  }
  return out;
}

ForwardStartResult price_forward_start(const PricingModel& model, double tau, double T,
                                       double T_hat, double log_strike, const PricingOptions& opt) {
  return price_forward_start(model, tau, T, T_hat, std::vector<double>{log_strike}, opt).front();
}

const SmileRow& SmileTable::at(std::size_t tau_index, std::size_t k_index) const {
  return rows.at(tau_index * log_strikes.size() + k_index);
}

const SmileRow& SmileTable::limit(std::size_t k_index) const {
  return rows.at(tau_grid.size() * log_strikes.size() + k_index);
}

double SmileTable::discrepancy(std::size_t tau_index, std::size_t k_index) const {
  return std::abs(at(tau_index, k_index).implied_vol - limit(k_index).implied_vol);
}

bool SmileTable::monotone(double z) const {
  for (std::size_t k = 0; k < log_strikes.size(); ++k) {
    for (std::size_t i = 0; i + 1 < tau_grid.size(); ++i) {
      const double s0 = at(i, k).se, s1 = at(i + 1, k).se;
      if (discrepancy(i + 1, k) > discrepancy(i, k) + z * std::hypot(s0, s1)) return false;
    }
  }
  return true;
}

namespace {

SmileRow smile_row(double tau, double T, double T_hat, double k, double price, double se,
                   double r) {
  SmileRow row{tau, T, T_hat, k, price, std::numeric_limits<double>::quiet_NaN(), 0.0};
  try {
    row.implied_vol = implied_forward_vol(price, k, T, r);
    // Unit-spot vega of C^BS(T, k + rT, sigma).
    const double sd = row.implied_vol * std::sqrt(T);
    const double d1 = (-k + 0.5 * sd * sd) / sd;
    const double vega = norm_pdf(d1) * std::sqrt(T);
    row.se = vega > 0.0 ? se / vega : std::numeric_limits<double>::infinity();
  } catch (const Error& err) {
    if (err.code() != ErrorCode::kPriceOutOfBounds) throw;
  }
  return row;
}

}  // namespace

SmileTable smile_convergence(const PricingModel& model, const std::vector<double>& tau_grid,
                             double T, double T_hat, const std::vector<double>& log_strikes,
                             const PricingOptions& opt) {
  require(T > 0.0, ErrorCode::kInvalidArgument, "smile needs T > 0");
  SmileTable table;
  table.tau_grid = tau_grid;
  table.log_strikes = log_strikes;
  for (double tau : tau_grid) {
    const auto res = price_forward_start(model, tau, T, T_hat, log_strikes, opt);
    for (std::size_t j = 0; j < log_strikes.size(); ++j) {
      table.rows.push_back(
          smile_row(tau, T, T_hat, log_strikes[j], res[j].price, res[j].se, model.r));
    }
  }
  const FourierEngine engine(model, T, T_hat, opt);
  const std::vector<double> lim = engine.call_stationary(log_strikes);
  for (std::size_t j = 0; j < log_strikes.size(); ++j) {
    table.rows.push_back(smile_row(std::numeric_limits<double>::infinity(), T, T_hat,
                                   log_strikes[j], lim[j], 0.0, model.r));
  }
  return table;
}

}  // namespace affine
