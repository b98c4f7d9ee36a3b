#pragma once

#include "rdde/controlled_paths.hpp"
#include "rdde/delayed_rough_lift.hpp"

namespace rdde {

/// Compensated Riemann sum over the grid cells of [a, b]:
///   I_t = sum_{t_j < t} zeta_j X_{j,j+1} + zeta0_j XX_{j,j+1} + zeta1_j XX_{j,j+1}(-r).
/// The result is controlled by X with Gubinelli derivative zeta.
/// Bounds are times; they must be grid-aligned and inside zeta's window.
ControlledSegment delayed_rough_integral(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp,
                                         double a, double b);

/// Index form of the above (time indices).
ControlledSegment delayed_rough_integral_steps(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp,
                                               int a, int b);

/// |int_s^t zeta dX - zeta_s X_{s,t} - zeta0_s XX_{s,t} - zeta1_s XX_{s,t}(-r)|.
double local_expansion_residual(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp, double s,
                                double t);
double local_expansion_residual_steps(const DelayedControlledSegment& zeta, const DelayedRoughPath& drp, int s,
                                      int t);

}  // namespace rdde
