#pragma once

#include <gtest/gtest.h>

#include <random>
#include <string>

#include "affine/io.hpp"

namespace affine::testing {

inline std::string data_path(const std::string& name) { return std::string(AFFINE_DATA_DIR) + "/" + name; }

/// Parsed and validated.
inline AdmissibleParams load_params(const std::string& name) {
  AdmissibleParams p = params_from_json(read_text_file(data_path(name)));
  p.validate();
  return p;
}

inline Matrix random_matrix(std::mt19937_64& g, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = z(g);
  }
  return m;
}

inline SymElement random_sym(std::mt19937_64& g, int n, double scale = 1.0) {
  const Matrix a = random_matrix(g, n, n, scale);
  return SymElement(Matrix(0.5 * (a + a.transpose())));
}

inline ConeElement random_cone(std::mt19937_64& g, int n, double scale = 1.0) {
  const Matrix a = random_matrix(g, n, n, scale);
  return ConeElement(Matrix(a * a.transpose()));
}

/// OU-type parameter set with small m-atoms and one big mu-atom; validated.
inline AdmissibleParams random_subcritical(std::mt19937_64& g, int n = 2) {
  const Matrix gen = random_matrix(g, n, n, 0.3) - Matrix::Identity(n, n);
  AtomicMeasure m;
  for (int k = 0; k < 2; ++k) m.atoms.push_back({0.5 + 0.5 * k, random_cone(g, n, 0.3)});
  OperatorMeasure mu;
  const SymElement big = SymElement::identity(n) + random_cone(g, n, 0.4).sym();
  mu.atoms.push_back({random_cone(g, n, 0.2), ConeElement(big)});
  const SymElement b = small_jump_compensator(m, n) + random_cone(g, n, 0.6).sym();
  AdmissibleParams p = AdmissibleParams::ou(gen, b, m, mu);
  p.validate();
  return p;
}

/// |a - b| <= rel * max(|a|, |b|, floor)
inline bool close_rel(double a, double b, double rel, double floor = 1.0) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace affine::testing
