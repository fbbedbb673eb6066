#include "affine/simulate.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "affine/parallel.hpp"
#include "affine/stationary.hpp"

namespace affine {

const char* to_string(Scheme s) noexcept {
  return s == Scheme::kOuExact ? "ou_exact" : "thinning";
}

namespace {

// exp(h [[L, c], [0, 0]]) = [[e^{hL}, int_0^h e^{sL} c ds], [0, 1]]
std::pair<Matrix, Vector> affine_flow(const Matrix& l, const Vector& c, double h) {
  const Eigen::Index n = l.rows();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = h * l;
  aug.topRightCorner(n, 1) = h * c;
  const Matrix e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

ConeElement to_cone(const Vector& v) {
  const SymElement s = unvec(v);
  return is_in_cone(s) ? ConeElement(s) : cone_project(s);
}

}  // namespace

OuExactSimulator::OuExactSimulator(const Matrix& g, const SymElement& b, const AtomicMeasure& m)
    : n_(b.dim()), g_(g) {
  require(g.rows() == n_ && g.cols() == n_, ErrorCode::kDimensionMismatch, "G has the wrong shape");
  const SymElement bc = b - small_jump_compensator(m, n_);
  if (!is_in_cone(bc)) {
    throw Error(ErrorCode::kDriftConditionViolated, "b - I_m is not positive semidefinite");
  }
  b_op_ = lyapunov_superop(g).matrix();
  b_c_ = vec(bc);
  for (const auto& a : m.atoms) {
    w_.push_back(a.w);
    xi_.push_back(a.xi.matrix());
  }
}

OuExactSimulator::Step OuExactSimulator::make_step(double dt) const {
  auto [e, d] = affine_flow(b_op_, b_c_, dt);
  return {std::move(e), std::move(d)};
}

void OuExactSimulator::prepare(const std::vector<double>& steps) {
  for (double h : steps) {
    if (h > 0.0 && !cache_.count(h)) cache_.emplace(h, make_step(h));
  }
}

void OuExactSimulator::advance(Vector& x, double dt, RandomStream& rng) const {
  if (dt <= 0.0) return;
  const auto it = cache_.find(dt);
  const Step fresh = it == cache_.end() ? make_step(dt) : Step{};
  const Step& st = it == cache_.end() ? fresh : it->second;
  Vector out = st.e * x + st.drift;
  for (std::size_t k = 0; k < w_.size(); ++k) {
    const std::uint64_t count = rng.poisson(w_[k] * dt);
    for (std::uint64_t j = 0; j < count; ++j) {
      const double remaining = dt * (1.0 - rng.uniform());
      const Matrix eg = (remaining * g_).exp();
      out += vec_raw(Matrix(eg * xi_[k] * eg.transpose()));
    }
  }
  x = std::move(out);
}

ThinningSimulator::ThinningSimulator(const AdmissibleParams& p, double dt_max)
    : n_(p.dim()), big_n_(sym_dim(p.dim())), dt_max_(dt_max) {
  require(dt_max > 0.0, ErrorCode::kInvalidArgument, "dt_max must be positive");
  p.require_validated();
  const CompiledParams& c = p.compiled();
  l_c_ = c.b_op;
  b_c_ = c.b;
  for (const auto& a : c.m) {
    b_c_ -= a.w * a.chi;
    m_w_.push_back(a.w);
    m_xi_.push_back(a.xi);
    m_rate_ += a.w;
  }
  for (const auto& a : c.mu) {
    l_c_ -= a.chi * a.mass.transpose() / a.norm2;
    mu_mass_.push_back(a.mass / a.norm2);
    mu_xi_.push_back(a.xi);
  }
}

ThinningSimulator::Flow ThinningSimulator::make_flow(double h) const {
  auto [e, s] = affine_flow(l_c_, b_c_, h);
  return {std::move(e), std::move(s)};
}

const ThinningSimulator::Flow* ThinningSimulator::cached(double h) const {
  const auto it = cache_.find(h);
  return it == cache_.end() ? nullptr : &it->second;
}

void ThinningSimulator::prepare(const std::vector<double>& steps) {
  for (double dt : steps) {
    if (dt <= 0.0) continue;
    const auto k = static_cast<long>(std::ceil(dt / dt_max_ - 1e-12));
    const double h = dt / static_cast<double>(std::max(1L, k));
    for (double hh : {h, 0.5 * h}) {
      if (!cache_.count(hh)) cache_.emplace(hh, make_flow(hh));
    }
  }
}

double ThinningSimulator::total_rate(const Vector& x, Vector* per_atom) const {
  double total = m_rate_;
  if (per_atom) per_atom->resize(static_cast<Eigen::Index>(m_w_.size() + mu_mass_.size()));
  for (std::size_t k = 0; k < m_w_.size(); ++k) {
    if (per_atom) (*per_atom)(static_cast<Eigen::Index>(k)) = m_w_[k];
  }
  for (std::size_t k = 0; k < mu_mass_.size(); ++k) {
    const double r = std::max(0.0, mu_mass_[k].dot(x));
    total += r;
    if (per_atom) (*per_atom)(static_cast<Eigen::Index>(m_w_.size() + k)) = r;
  }
  return total;
}

void ThinningSimulator::substep(Vector& x, double h, RandomStream& rng) const {
  double done = 0.0;
  while (done < h) {
    const double len = h - done;
    const Flow* f_end = done == 0.0 ? cached(h) : nullptr;
    const Flow* f_mid = done == 0.0 ? cached(0.5 * h) : nullptr;
    const Flow fe = f_end ? Flow{} : make_flow(len);
    const Flow fm = f_mid ? Flow{} : make_flow(0.5 * len);
    const Flow& end = f_end ? *f_end : fe;
    const Flow& mid = f_mid ? *f_mid : fm;
    const Vector x_end = end.e * x + end.shift;
    if (mu_mass_.empty() && m_w_.empty()) {
      x = x_end;
      return;
    }
    const Vector x_mid = mid.e * x + mid.shift;
    // Per-atom maximum over the three probe points, inflated by 5%.
    double bar = m_rate_;
    for (const auto& mk : mu_mass_) {
      bar += std::max({0.0, mk.dot(x), mk.dot(x_mid), mk.dot(x_end)});
    }
    bar *= 1.05;
    bool restart = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (!(bar <= 1e9)) throw Error(ErrorCode::kMajorantOverflow, "jump intensity above 1e9");
      restart = false;
      double s = 0.0;
      bool jumped = false;
      while (true) {
        s += rng.exponential(bar);
        if (s >= len) break;
        const Flow fs = make_flow(s);
        const Vector xs = fs.e * x + fs.shift;
        Vector per;
        const double lam = total_rate(xs, &per);
        if (lam > bar) {
          violations_.fetch_add(1, std::memory_order_relaxed);
          bar *= 2.0;
          restart = true;
          break;
        }
        if (rng.uniform() * bar < lam) {
          // Select the atom proportionally to its intensity.
          double pick = rng.uniform() * lam;
          Eigen::Index k = 0;
          for (; k + 1 < per.size(); ++k) {
            if (pick < per(k)) break;
            pick -= per(k);
          }
          const std::size_t ks = static_cast<std::size_t>(k);
          x = xs + (ks < m_xi_.size() ? m_xi_[ks] : mu_xi_[ks - m_xi_.size()]);
          done += s;
          jumped = true;
          break;
        }
      }
      if (restart) continue;
      if (!jumped) {
        x = x_end;
        done = h;
      }
      break;
    }
    if (restart) throw Error(ErrorCode::kMajorantOverflow, "majorant could not be certified");
    const SymElement sx = unvec(x);
    if (min_eigenvalue(sx) < 0.0) x = vec(cone_project(sx).sym());
  }
}

void ThinningSimulator::advance(Vector& x, double dt, RandomStream& rng) const {
  if (dt <= 0.0) return;
  const auto k = static_cast<long>(std::ceil(dt / dt_max_ - 1e-12));
  const long steps = std::max(1L, k);
  if (steps > 100'000'000L) throw Error(ErrorCode::kStepSizeUnderflow, "too many thinning steps");
  const double h = dt / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) substep(x, h, rng);
}

std::unique_ptr<ProcessSimulator> make_simulator(const AdmissibleParams& p, double dt_max) {
  if (p.mu().empty() && p.lyapunov_generator()) {
    return std::make_unique<OuExactSimulator>(*p.lyapunov_generator(), p.b(), p.m());
  }
  return std::make_unique<ThinningSimulator>(p, dt_max);
}

namespace {

std::vector<double> grid_steps(const TimeGrid& grid) {
  std::vector<double> steps;
  for (std::size_t i = 1; i < grid.size(); ++i) steps.push_back(grid[i] - grid[i - 1]);
  if (!grid.empty()) steps.push_back(grid.front());
  return steps;
}

void check_grid(const TimeGrid& grid) {
  require(!grid.empty(), ErrorCode::kInvalidArgument, "time grid is empty");
  require(grid.front() >= 0.0, ErrorCode::kInvalidArgument, "time grid must start at t >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    require(grid[i] > grid[i - 1], ErrorCode::kInvalidArgument, "time grid must increase");
  }
}

}  // namespace

PathSample run_path(const ProcessSimulator& sim, const ConeElement& x0, const TimeGrid& grid,
                    std::uint64_t seed, std::uint64_t path_index) {
  check_grid(grid);
  require(x0.dim() == sim.dim(), ErrorCode::kDimensionMismatch, "x0 has the wrong dimension");
  RandomStream rng(seed, path_index);
  PathSample out;
  out.seed = seed;
  out.path_index = path_index;
  out.scheme = sim.scheme();
  out.times = grid;
  out.states.reserve(grid.size());
  Vector x = vec(x0.sym());
  double t = 0.0;
  for (double tg : grid) {
    sim.advance(x, tg - t, rng);
    t = tg;
    out.states.push_back(to_cone(x));
  }
  return out;
}

std::vector<PathSample> simulate_paths(ProcessSimulator& sim, const ConeElement& x0,
                                       const TimeGrid& grid, std::uint64_t seed,
                                       std::size_t n_paths, int threads) {
  check_grid(grid);
  sim.prepare(grid_steps(grid));
  std::vector<PathSample> out(n_paths);
  parallel_for(
      n_paths, [&](std::size_t i) { out[i] = run_path(sim, x0, grid, seed, i); }, threads);
  return out;
}

PathSample simulate_ou_exact(const Matrix& g, const SymElement& b, const AtomicMeasure& m,
                             const ConeElement& x0, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t path_index) {
  OuExactSimulator sim(g, b, m);
  check_grid(grid);
  sim.prepare(grid_steps(grid));
  return run_path(sim, x0, grid, seed, path_index);
}

PathSample simulate_affine_thinning(const AdmissibleParams& p, const ConeElement& x0,
                                    const TimeGrid& grid, std::uint64_t seed, double dt_max,
                                    std::uint64_t path_index) {
  ThinningSimulator sim(p, dt_max);
  check_grid(grid);
  sim.prepare(grid_steps(grid));
  return run_path(sim, x0, grid, seed, path_index);
}

StationarySample stationary_sampler(const AdmissibleParams& p, double burn_in, double thin,
                                    std::size_t count, std::uint64_t seed,
                                    const StationarySamplerOptions& opt) {
  require(burn_in >= 0.0, ErrorCode::kInvalidArgument, "burn_in must be nonnegative");
  require(count >= 1, ErrorCode::kInvalidArgument, "count must be positive");
  const std::size_t per = std::max<std::size_t>(1, opt.samples_per_chain);
  require(per == 1 || thin > 0.0, ErrorCode::kInvalidArgument, "thin must be positive");
  const StationaryLaw law(p);
  StationarySample out;
  out.x0 = opt.x0 ? *opt.x0 : cone_project(law.mean());
  out.burn_in = burn_in;
  out.bias_bound = wasserstein_bound(law, out.x0, 2.0, burn_in);
  const double dt_max = opt.dt_max > 0.0 ? opt.dt_max : 0.01 / law.delta();
  auto sim = make_simulator(p, dt_max);
  TimeGrid grid;
  for (std::size_t i = 0; i < per; ++i) grid.push_back(burn_in + static_cast<double>(i) * thin);
  const std::size_t chains = (count + per - 1) / per;
  const auto paths = simulate_paths(*sim, out.x0, grid, seed, chains, opt.threads);
  out.samples.reserve(count);
  for (const auto& path : paths) {
    for (const auto& s : path.states) {
      if (out.samples.size() < count) out.samples.push_back(s);
    }
  }
  return out;
}

EnsembleStats ensemble_stats(const std::vector<PathSample>& paths) {
  require(!paths.empty(), ErrorCode::kInvalidArgument, "no paths");
  EnsembleStats st;
  st.n_paths = paths.size();
  st.times = paths.front().times;
  for (const auto& p : paths) {
    if (p.times != st.times) throw Error(ErrorCode::kGridMismatch, "paths use different grids");
  }
  const int n = paths.front().states.front().dim();
  const int big_n = sym_dim(n);
  const double np = static_cast<double>(paths.size());
  for (std::size_t ti = 0; ti < st.times.size(); ++ti) {
    // Sums of deviations from the first sample: identical samples give exactly zero spread.
    const Vector ref = vec(paths.front().states[ti].sym());
    const Matrix ref2 = ref * ref.transpose();
    std::vector<Vector> ds;
    std::vector<Matrix> ds2;
    ds.reserve(paths.size());
    ds2.reserve(paths.size());
    Vector sum = Vector::Zero(big_n);
    Matrix sum2 = Matrix::Zero(big_n, big_n);
    for (const auto& p : paths) {
      const Vector x = vec(p.states[ti].sym());
      ds.push_back(x - ref);
      ds2.push_back(x * x.transpose() - ref2);
      sum += ds.back();
      sum2 += ds2.back();
    }
    const Vector dmean = sum / np;
    const Matrix dm2 = sum2 / np;
    const Vector mean = ref + dmean;
    const Matrix m2 = ref2 + dm2;
    Vector var = Vector::Zero(big_n);
    Matrix var2 = Matrix::Zero(big_n, big_n);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      var += (ds[k] - dmean).cwiseAbs2();
      var2 += (ds2[k] - dm2).cwiseAbs2();
    }
    const double denom = paths.size() > 1 ? (np - 1.0) * np : 1.0;
    st.mean.push_back(unvec(mean));
    st.second_moment.push_back(SuperOperator(n, 0.5 * (m2 + m2.transpose())));
    st.mean_se.push_back((var / denom).cwiseSqrt());
    st.second_moment_se.push_back((var2 / denom).cwiseSqrt());
  }
  return st;
}

}  // namespace affine
