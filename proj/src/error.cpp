#include "rdde/error.hpp"

#include <cmath>

namespace rdde {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kGridNotUniform: return "grid-not-uniform";
    case ErrorCode::kTooLarge: return "too-large";
    case ErrorCode::kInsufficientHistory: return "insufficient-history";
    case ErrorCode::kMisaligned: return "misaligned";
    case ErrorCode::kWindowOutOfRange: return "window-out-of-range";
    case ErrorCode::kCoverageGap: return "coverage-gap";
    case ErrorCode::kDegenerateQuadrature: return "degenerate-quadrature";
    case ErrorCode::kOverflow: return "overflow";
    case ErrorCode::kFrameCollapse: return "frame-collapse";
    case ErrorCode::kMissingBaseTrajectory: return "missing-base-trajectory";
    case ErrorCode::kBoundaryRoot: return "boundary-root";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kRegionLimit: return "region-limit";
    case ErrorCode::kAllPathsAborted: return "all-paths-aborted";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

int grid_index(double t, double step, const char* what) {
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidArgument, "grid step must be positive");
  const double ratio = t / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-8 * std::max(1.0, std::abs(ratio))) {
    throw Error(ErrorCode::kMisaligned,
                std::string(what) + " = " + std::to_string(t) + " is not a multiple of the step");
  }
  return static_cast<int>(rounded);
}

}  // namespace rdde
