#pragma once

// Acceptance criteria as reusable checks. Each criterion returns its verdict
// and a CSV artifact of every number it computed, so reruns can be compared
// byte for byte.

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace affine::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string summary;   // one line, printed after PASS/FAIL
  std::string artifact;  // CSV text
  double seconds = 0.0;
};

struct Options {
  std::string data_dir;  // holds ou_n2.json, mu_n2.json and bns_desk.json
  std::uint64_t seed = 20240917;
  int threads = 1;
  std::vector<int> threads_alt{1, 8};  // worker counts compared by criterion 11
  std::ostream* log = nullptr;         // progress lines, may be null
};

using Criterion = std::function<CriterionResult(const Options&)>;

CriterionResult admissibility_gate(const Options& opt);        // 1
CriterionResult riccati_correctness(const Options& opt);       // 2
CriterionResult transform_vs_simulation(const Options& opt);   // 3
CriterionResult moment_formulas(const Options& opt);           // 4
CriterionResult invariance_fixed_point(const Options& opt);    // 5
CriterionResult wasserstein_decay(const Options& opt);         // 6
CriterionResult convolution_inequality(const Options& opt);         // 7
CriterionResult joint_transform_consistency(const Options& opt);  // 8
CriterionResult pricing_cross_validation(const Options& opt);  // 9
CriterionResult smile_convergence_check(const Options& opt);   // 10

/// Criteria 1 to 10 in order.
std::vector<Criterion> numbered_criteria();

/// Criterion 11 given the artifacts of a first pass at opt.threads.
CriterionResult reproducibility(const Options& opt, const std::vector<CriterionResult>& first);

/// Runs 1 to 11; `on_result` sees each result as it completes.
std::vector<CriterionResult> run_all(const Options& opt,
                                     const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  3  transform vs simulation: ..." with the elapsed time.
std::string format_line(const CriterionResult& r);

}  // namespace affine::acceptance
