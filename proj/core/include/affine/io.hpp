#pragma once

// JSON model documents and CSV output. JSON keys are checked against a fixed
// schema; unknown keys raise kConfig.
//
// Parameters: {"dim": n, "b": n x n, "B": N x N | {"lyapunov": G, "add": N x N},
//              "m": [{"w": w, "xi": n x n}], "mu": [{"M": n x n, "xi": n x n}]}
// Matrices are nested row arrays or flat row-major arrays.
// Joint model: {"dim_h", "A", "g0", "Gamma", "D" | "Lambda", "x_params"}.
// Pricing model: joint keys plus {"beta", "anchors", "r", "x0", "y0", "stationary_start"};
// with beta/anchors, A defaults to the truncated shift generator, g0 to 0 and
// Gamma to risk_neutral_gamma.

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "affine/forward.hpp"

namespace affine {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

AdmissibleParams params_from_json(std::string_view text);
std::string params_to_json(const AdmissibleParams& p);
JointModelSpec joint_spec_from_json(std::string_view text);
PricingModel pricing_model_from_json(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t h);

/// Shortest round-trip decimal form of x.
std::string format_double(double x);

/// "# config-hash <hex>" then the header row, then comma separated rows.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::uint64_t config_hash, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& os_;
  std::size_t width_;
};

/// Rows of numbers from a CSV file; '#' lines and a non-numeric header are skipped.
std::vector<Vector> read_csv_rows(const std::string& path);

}  // namespace affine
