#pragma once

#include <cstdint>
#include <vector>

#include "affine/cone.hpp"

namespace affine {

/// Point cloud in vec coordinates (Euclidean norm = Hilbert-Schmidt norm).
using Cloud = std::vector<Vector>;

Cloud to_cloud(const std::vector<ConeElement>& xs);

enum class TransportMethod { kExactAssignment, kSinkhorn };

struct TransportResult {
  double distance = 0.0;
  double p = 2.0;
  TransportMethod method = TransportMethod::kExactAssignment;
  double epsilon = 0.0;
  double bootstrap_se = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

inline constexpr std::size_t kMaxAssignmentSize = 4096;

/// Optimal assignment cost matrix solver (shortest augmenting paths, O(n^3)).
/// Returns the column assigned to each row.
std::vector<int> solve_assignment(const Matrix& cost);

/// Exact W_p between equal-size empirical measures; n_boot > 0 adds a
/// bootstrap standard error.
TransportResult wp_exact(const Cloud& a, const Cloud& b, double p, int n_boot = 0,
                         std::uint64_t seed = 0, int threads = 0);

/// Debiased entropic transport (log-domain Sinkhorn with epsilon scaling).
/// epsilon is absolute, in cost units; tol bounds the L1 marginal violation.
TransportResult wp_sinkhorn(const Cloud& a, const Cloud& b, double p, double epsilon,
                            int max_iter = 5000, double tol = 1e-6);

struct ConvolutionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  bool pass = false;
};

/// W_2({rho_i + mu_i}, {rho_i + nu_i}) against W_2(mu, nu).
ConvolutionCheck convolution_check(const Cloud& rho, const Cloud& mu_s, const Cloud& nu_s,
                                   int n_boot = 20, std::uint64_t seed = 0, int threads = 0);

struct DecayFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log d on t; rate is the negated slope.
DecayFit decay_fit(const std::vector<double>& times, const std::vector<double>& distances);

}  // namespace affine
