#pragma once

#include <ostream>
#include <string>

#include "config.hpp"

namespace affine::lab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command, writing its CSV (or report) into out_dir. Module errors
/// are caught and printed to `err` as one JSON object; the return value is the
/// process exit code.
int run(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err);

/// Output file name used when the config names none.
std::string default_output(Command c);

}  // namespace affine::lab
