#pragma once

// Composite Gauss-Legendre rules built from Boost's tabulated nodes.

#include <boost/math/quadrature/gauss.hpp>

#include <vector>

namespace affine {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  void append_panel(double a, double b);
  std::size_t size() const noexcept { return nodes.size(); }
};

/// 20-point Gauss-Legendre rule on [a, b].
inline void QuadratureRule::append_panel(double a, double b) {
  using G = boost::math::quadrature::gauss<double, 20>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(mid - half * x[i]);
    weights.push_back(half * w[i]);
    nodes.push_back(mid + half * x[i]);
    weights.push_back(half * w[i]);
  }
}

/// `panels` equal panels on [a, b].
inline QuadratureRule gauss_legendre_panels(double a, double b, int panels) {
  QuadratureRule r;
  const double h = (b - a) / panels;
  for (int k = 0; k < panels; ++k) r.append_panel(a + k * h, a + (k + 1) * h);
  return r;
}

/// Panels on [0, T] whose widths grow geometrically from h0 (for decaying integrands).
inline QuadratureRule gauss_legendre_graded(double T, double h0, double growth = 1.3) {
  QuadratureRule r;
  double a = 0.0, h = h0;
  while (a < T) {
    const double b = std::min(T, a + h);
    r.append_panel(a, b);
    a = b;
    h *= growth;
  }
  return r;
}

}  // namespace affine
