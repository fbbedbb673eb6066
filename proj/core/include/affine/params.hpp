#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "affine/cone.hpp"

namespace affine {

/// Atom of the state-independent jump measure m.
struct JumpAtom {
  double w = 0.0;
  ConeElement xi;
};

struct AtomicMeasure {
  std::vector<JumpAtom> atoms;

  bool empty() const noexcept { return atoms.empty(); }
  /// sum_k w_k ||xi_k||^2
  double second_moment() const;
};

/// Atom of the operator-valued measure mu: mass M_k sitting at xi_k.
struct OperatorAtom {
  ConeElement mass;
  ConeElement xi;
};

struct OperatorMeasure {
  std::vector<OperatorAtom> atoms;

  bool empty() const noexcept { return atoms.empty(); }
  /// sum_k M_k, the total mass mu(H+ \ {0}).
  SymElement total_mass(int n) const;
};

/// chi(xi) = xi 1{||xi|| <= 1}
inline bool is_small_jump(const SymElement& xi) { return hs_norm(xi) <= 1.0; }

struct ConditionVerdict {
  std::string name;
  bool pass = true;
  bool automatic = false;
  double worst = 0.0;  // most negative value seen (0 when automatic)
  std::string detail;
};

struct ValidationReport {
  std::vector<ConditionVerdict> conditions;
  bool all_pass() const;
};

/// Vec-coordinate data shared by the Riccati right-hand sides and simulators.
struct CompiledParams {
  int n = 0;
  int big_n = 0;
  Vector b;
  Matrix b_op;     // B in vec coordinates (acts on states)
  Matrix b_adj;    // B*, acts on Riccati arguments
  struct MAtom {
    double w;
    Vector xi;
    Vector chi;  // xi or 0
    double norm2;
  };
  struct MuAtom {
    Vector mass;
    Vector xi;
    Vector chi;
    double norm2;
  };
  std::vector<MAtom> m;
  std::vector<MuAtom> mu;
};

/// Tuple (b, B, m, mu). Validation is explicit and recorded.
class AdmissibleParams {
 public:
  AdmissibleParams() = default;
  AdmissibleParams(SymElement b, SuperOperator big_b, AtomicMeasure m, OperatorMeasure mu);

  /// B = lyapunov_superop(G); the generator G is remembered for exact OU simulation.
  static AdmissibleParams ou(const Matrix& g, SymElement b, AtomicMeasure m,
                             OperatorMeasure mu = {});

  int dim() const noexcept { return b_.dim(); }
  const SymElement& b() const noexcept { return b_; }
  const SuperOperator& B() const noexcept { return big_b_; }
  const AtomicMeasure& m() const noexcept { return m_; }
  const OperatorMeasure& mu() const noexcept { return mu_; }
  const std::optional<Matrix>& lyapunov_generator() const noexcept { return g_; }
  const CompiledParams& compiled() const noexcept { return compiled_; }

  bool validated() const noexcept { return validated_; }
  const ValidationReport& report() const noexcept { return report_; }

  /// Runs validate() and records the outcome; returns the report.
  const ValidationReport& validate(int n_probe = 100, double tol = 1e-10,
                                   std::uint64_t seed = 0x5eed);
  /// Throws kNotValidated unless a passing validation has been recorded.
  void require_validated() const;

 private:
  void compile();

  SymElement b_;
  SuperOperator big_b_;
  AtomicMeasure m_;
  OperatorMeasure mu_;
  std::optional<Matrix> g_;
  CompiledParams compiled_;
  bool validated_ = false;
  ValidationReport report_;
};

/// I_m = sum over small atoms of w_k xi_k.
SymElement small_jump_compensator(const AtomicMeasure& m, int n);

/// Per-condition admissibility verdicts; never throws on failure.
ValidationReport validate(const AdmissibleParams& p, int n_probe = 100, double tol = 1e-10,
                          std::uint64_t seed = 0x5eed);

struct EffectiveDrift {
  SymElement b_hat;
  SuperOperator B_hat;  // acts on Riccati arguments u
};

/// b_hat = b + sum_{big} w xi, B_hat(u) = B*(u) + sum_{big} <xi,u> M / ||xi||^2.
EffectiveDrift effective_drift(const AdmissibleParams& p);

struct JumpRate {
  double rate = 0.0;
  int atom = 0;      // index into the merged list: m atoms first, then mu atoms
  SymElement site;
};

/// Merged list of jump intensities at state x.
std::vector<JumpRate> jump_rates(const AdmissibleParams& p, const ConeElement& x);

}  // namespace affine
