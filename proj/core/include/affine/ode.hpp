#pragma once

// Dormand-Prince 5(4) with mixed absolute/relative error control, mandatory
// stop points and cubic Hermite dense output. Works for real and complex
// Eigen vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "affine/error.hpp"

namespace affine {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double h_init = 0.0;  // 0 selects a starting step automatically
  double h_min = 1e-13;
  long max_steps = 2'000'000;
  bool keep_all = true;  // false keeps only t0 and the stop points
};

enum class StepVerdict { kAccept, kModified, kReject };

template <class S>
struct OdeTrajectory {
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  std::vector<double> t;
  std::vector<Vec> y;
  std::vector<Vec> f;
  long accepted = 0;
  long rejected = 0;

  /// Cubic Hermite interpolation between stored nodes; exact at nodes.
  Vec at(double tq) const {
    require(!t.empty(), ErrorCode::kInvalidArgument, "empty trajectory");
    if (tq <= t.front()) return y.front();
    if (tq >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), tq);
    const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double h = t[i + 1] - t[i];
    const double s = (tq - t[i]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y[i] + (h10 * h) * f[i] + h01 * y[i + 1] + (h11 * h) * f[i + 1];
  }
};

namespace detail {

template <class S>
double err_norm(const Eigen::Matrix<S, Eigen::Dynamic, 1>& err,
                const Eigen::Matrix<S, Eigen::Dynamic, 1>& y0,
                const Eigen::Matrix<S, Eigen::Dynamic, 1>& y1, const OdeOptions& o) {
  double acc = 0.0;
  const Eigen::Index n = err.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double e = std::abs(err(i)) / sc;
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(n, 1)));
}

}  // namespace detail

struct AcceptAll {
  template <class V>
  StepVerdict operator()(double, V&) const {
    return StepVerdict::kAccept;
  }
};

/// Integrates y' = rhs(t, y) from t0 to t1. Every entry of `stops` inside
/// (t0, t1] is hit exactly and stored. `guard(t, y_new)` may modify or reject
/// a step that passed error control.
template <class S, class Rhs, class Guard = AcceptAll>
OdeTrajectory<S> dopri5(Rhs&& rhs, const Eigen::Matrix<S, Eigen::Dynamic, 1>& y0, double t0,
                        double t1, std::vector<double> stops, const OdeOptions& opt,
                        Guard&& guard = Guard{}) {
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  require(t1 >= t0, ErrorCode::kInvalidArgument, "integration interval reversed");
  stops.push_back(t1);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double s) { return s <= t0 || s > t1; }),
              stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  OdeTrajectory<S> out;
  Vec y = y0;
  Vec f = rhs(t0, y);
  out.t.push_back(t0);
  out.y.push_back(y);
  out.f.push_back(f);
  if (t1 == t0) return out;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double t = t0;
  double h = opt.h_init;
  if (h <= 0.0) {
    const double d0 = y.norm(), d1 = f.norm();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-4 : 0.01 * d0 / d1;
    h = std::min(h, 0.1 * (t1 - t0));
    h = std::max(h, 1e-8 * std::max(1.0, t1 - t0));
  }
  std::size_t next_stop = 0;
  long steps = 0;
  while (next_stop < stops.size()) {
    if (++steps > opt.max_steps) throw Error(ErrorCode::kStepSizeUnderflow, "too many ODE steps");
    const double target = stops[next_stop];
    bool hits = false;
    double hs = h;
    if (t + hs >= target - 1e-14 * std::max(1.0, std::abs(target))) {
      hs = target - t;
      hits = true;
    }
    const Vec k1 = f;
    const Vec k2 = rhs(t + c2 * hs, Vec(y + hs * (a21 * k1)));
    const Vec k3 = rhs(t + c3 * hs, Vec(y + hs * (a31 * k1 + a32 * k2)));
    const Vec k4 = rhs(t + c4 * hs, Vec(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
    const Vec k5 = rhs(t + c5 * hs, Vec(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const Vec k6 =
        rhs(t + hs, Vec(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    Vec ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double tnew = hits ? target : t + hs;
    Vec fnew = rhs(tnew, ynew);
    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * fnew);
    const double en = detail::err_norm<S>(err, y, ynew, opt);
    if (!std::isfinite(en)) {
      h = 0.25 * hs;
      ++out.rejected;
      if (h < opt.h_min) throw Error(ErrorCode::kStepSizeUnderflow, "non-finite ODE state");
      continue;
    }
    if (en > 1.0) {
      h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
      ++out.rejected;
      if (h < opt.h_min) throw Error(ErrorCode::kStepSizeUnderflow, "ODE step size underflow");
      continue;
    }
    const StepVerdict v = guard(tnew, ynew);
    if (v == StepVerdict::kReject) {
      h = 0.5 * hs;
      ++out.rejected;
      if (h < opt.h_min) throw Error(ErrorCode::kStepSizeUnderflow, "step rejected below h_min");
      continue;
    }
    if (v == StepVerdict::kModified) fnew = rhs(tnew, ynew);
    ++out.accepted;
    t = tnew;
    y = std::move(ynew);
    f = std::move(fnew);
    const double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
    // Do not let a short landing step shrink the next step.
    h = hits ? std::max(h, hs * fac) : hs * fac;
    if (hits) ++next_stop;
    if (opt.keep_all || hits) {
      out.t.push_back(t);
      out.y.push_back(y);
      out.f.push_back(f);
    }
  }
  return out;
}

}  // namespace affine
