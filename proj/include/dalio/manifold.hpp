#pragma once

#include "dalio/types.hpp"

// SO(3) primitives shared by every propagation and update step.
// Convention: right perturbation throughout, R boxplus dtheta = R * Exp(dtheta).

namespace dalio {

/// Skew-symmetric operator: skew(v) * w == v x w.
Mat3 skew(const Vec3& v);

/// Rodrigues exponential. Falls back to the 2nd-order Taylor series below
/// 1e-8 rad. Throws std::invalid_argument on non-finite input.
Mat3 so3_exp(const Vec3& phi);

/// Principal logarithm, norm <= pi. Uses the largest-diagonal branch near pi;
/// the sign there is a convention, fixed by exp(log(R)) == R.
Vec3 so3_log(const Mat3& rot);

/// Right Jacobian of SO(3): Exp(phi + d) ~= Exp(phi) * Exp(Jr(phi) * d).
Mat3 so3_right_jacobian(const Vec3& phi);

/// Inverse of the right Jacobian: Log(Exp(phi) * Exp(d)) ~= phi + Jr_inv(phi) * d.
Mat3 so3_right_jacobian_inv(const Vec3& phi);

/// True when rot * rot^T == I and det(rot) == 1 within tol.
bool is_rotation(const Mat3& rot, double tol = 1e-9);

}  // namespace dalio
