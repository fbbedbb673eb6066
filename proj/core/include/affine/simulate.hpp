#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "affine/params.hpp"
#include "affine/rng.hpp"

namespace affine {

using TimeGrid = std::vector<double>;

enum class Scheme { kOuExact, kThinning };

const char* to_string(Scheme s) noexcept;

struct PathSample {
  std::vector<double> times;
  std::vector<ConeElement> states;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  Scheme scheme = Scheme::kOuExact;
};

/// Advances a state given in vec coordinates. Implementations are immutable
/// after prepare() and may be shared by concurrent workers.
class ProcessSimulator {
 public:
  virtual ~ProcessSimulator() = default;
  virtual int dim() const noexcept = 0;
  virtual Scheme scheme() const noexcept = 0;
  /// Caches step data for the given step lengths. Not thread-safe.
  virtual void prepare(const std::vector<double>& steps) = 0;
  virtual void advance(Vector& x, double dt, RandomStream& rng) const = 0;
};

/// Exact scheme for X_t = e^{tG} x e^{tG^T} + int e^{(t-s)G} dL_s e^{(t-s)G^T}
/// with L = drift b_c plus compound Poisson jumps from m.
class OuExactSimulator final : public ProcessSimulator {
 public:
  OuExactSimulator(const Matrix& g, const SymElement& b, const AtomicMeasure& m);

  int dim() const noexcept override { return n_; }
  Scheme scheme() const noexcept override { return Scheme::kOuExact; }
  void prepare(const std::vector<double>& steps) override;
  void advance(Vector& x, double dt, RandomStream& rng) const override;

 private:
  struct Step {
    Matrix e;      // e^{dt B} on vec coordinates
    Vector drift;  // int_0^dt e^{sB} b_c ds
  };
  Step make_step(double dt) const;

  int n_;
  Matrix g_;
  Matrix b_op_;
  Vector b_c_;
  std::vector<double> w_;
  std::vector<Matrix> xi_;
  std::map<double, Step> cache_;
};

/// Non-compensated affine flow x' = b_c + B_c(x) between jumps, jumps by
/// Ogata thinning on a fixed lattice of sub-steps no longer than dt_max.
class ThinningSimulator final : public ProcessSimulator {
 public:
  ThinningSimulator(const AdmissibleParams& p, double dt_max);

  int dim() const noexcept override { return n_; }
  Scheme scheme() const noexcept override { return Scheme::kThinning; }
  void prepare(const std::vector<double>& steps) override;
  void advance(Vector& x, double dt, RandomStream& rng) const override;

  double dt_max() const noexcept { return dt_max_; }
  /// Count of majorant violations that forced a restart, over this object's life.
  long violations() const noexcept { return violations_.load(); }

 private:
  struct Flow {
    Matrix e;
    Vector shift;
  };
  Flow make_flow(double h) const;
  const Flow* cached(double h) const;
  void substep(Vector& x, double h, RandomStream& rng) const;
  double total_rate(const Vector& x, Vector* per_atom) const;

  int n_;
  int big_n_;
  double dt_max_;
  Matrix l_c_;
  Vector b_c_;
  double m_rate_ = 0.0;
  std::vector<double> m_w_;
  std::vector<Vector> m_xi_;
  std::vector<Vector> mu_mass_;  // already divided by ||xi||^2
  std::vector<Vector> mu_xi_;
  std::map<double, Flow> cache_;
  mutable std::atomic<long> violations_{0};
};

/// OU exact when mu is empty and B came from lyapunov_superop(G); thinning otherwise.
std::unique_ptr<ProcessSimulator> make_simulator(const AdmissibleParams& p, double dt_max);

/// Deterministic in (simulator, x0, grid, seed, path_index).
PathSample run_path(const ProcessSimulator& sim, const ConeElement& x0, const TimeGrid& grid,
                    std::uint64_t seed, std::uint64_t path_index);

/// Paths 0..n_paths-1, bit-identical for any worker count.
std::vector<PathSample> simulate_paths(ProcessSimulator& sim, const ConeElement& x0,
                                       const TimeGrid& grid, std::uint64_t seed,
                                       std::size_t n_paths, int threads = 0);

PathSample simulate_ou_exact(const Matrix& g, const SymElement& b, const AtomicMeasure& m,
                             const ConeElement& x0, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t path_index = 0);

PathSample simulate_affine_thinning(const AdmissibleParams& p, const ConeElement& x0,
                                    const TimeGrid& grid, std::uint64_t seed, double dt_max,
                                    std::uint64_t path_index = 0);

struct StationarySample {
  std::vector<ConeElement> samples;
  ConeElement x0;
  double burn_in = 0.0;
  double bias_bound = 0.0;  // wasserstein_bound(law, x0, 2, burn_in)
};

struct StationarySamplerOptions {
  std::size_t samples_per_chain = 1;
  std::optional<ConeElement> x0;  // defaults to the stationary mean
  double dt_max = 0.0;            // thinning lattice; 0 selects 0.01/delta
  int threads = 0;
};

/// Samples at burn_in + i*thin along independent chains started at x0.
StationarySample stationary_sampler(const AdmissibleParams& p, double burn_in, double thin,
                                    std::size_t count, std::uint64_t seed,
                                    const StationarySamplerOptions& opt = {});

struct EnsembleStats {
  std::size_t n_paths = 0;
  std::vector<double> times;
  std::vector<SymElement> mean;
  std::vector<SuperOperator> second_moment;  // E[vec X vec X^T]
  std::vector<Vector> mean_se;               // vec coordinates
  std::vector<Matrix> second_moment_se;
};

/// Sample moments with jackknife standard errors (for sample means the
/// jackknife reduces to s / sqrt(n)).
EnsembleStats ensemble_stats(const std::vector<PathSample>& paths);

/// Mean of f over samples and its standard error.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};
template <class Range, class F>
McEstimate mc_estimate(const Range& xs, F&& f) {
  // Two passes: Neumaier-compensated mean, then centred variance.
  double s = 0.0, c = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs) {
    const double v = f(x);
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
    ++n;
  }
  McEstimate e;
  if (n == 0) return e;
  e.mean = (s + c) / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& x : xs) {
    const double d = f(x) - e.mean;
    ss += d * d;
  }
  e.se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return e;
}

}  // namespace affine
