#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affine {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotSymmetric,
  kNotInCone,
  kEigenFailure,
  kNotSubcritical,
  kNotValidated,
  kDriftConditionViolated,
  kStepSizeUnderflow,
  kDomainBlowup,
  kMajorantOverflow,
  kSingularSolve,
  kSizeMismatch,
  kSizeCapExceeded,
  kNonConvergence,
  kPriceOutOfBounds,
  kGridMismatch,
  kNotBnsShaped,
  kConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that indicate bad input rather than a numerical breakdown.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) throw Error(code, message);
}

}  // namespace affine
