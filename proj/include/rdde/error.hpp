#pragma once

#include <stdexcept>
#include <string>

namespace rdde {

enum class ErrorCode {
  kInvalidArgument,
  kGridNotUniform,
  kTooLarge,
  kInsufficientHistory,
  kMisaligned,
  kWindowOutOfRange,
  kCoverageGap,
  kDegenerateQuadrature,
  kOverflow,
  kFrameCollapse,
  kMissingBaseTrajectory,
  kBoundaryRoot,
  kNoConvergence,
  kRegionLimit,
  kAllPathsAborted,
  kConfig,
};

const char* to_string(ErrorCode code) noexcept;

/// Library error. Every failure mode named in the public API maps to one code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the solver when a path blows up; carries the r-segment index.
class OverflowError : public Error {
 public:
  OverflowError(int segment, const std::string& what)
      : Error(ErrorCode::kOverflow, what + " (segment " + std::to_string(segment) + ")"),
        segment_(segment) {}

  int segment() const noexcept { return segment_; }

 private:
  int segment_;
};

// Converts a time to a grid index, throwing kMisaligned if t is not a multiple of step.
int grid_index(double t, double step, const char* what);

}  // namespace rdde
