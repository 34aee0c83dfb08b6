#pragma once

#include <span>

#include "dalio/state.hpp"
#include "dalio/types.hpp"

// IMU-driven forward propagation between scans: one Euler step on the
// manifold per sample, covariance through analytic Jacobians.

namespace dalio {

struct ImuSample {
  double t = 0.0;      // s
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2
};

/// Per-axis variance rates of the continuous-time noise model.
struct NoiseParams {
  double gyro = 1e-5;        // (rad/s)^2 / Hz
  double accel = 4e-4;       // (m/s^2)^2 / Hz
  double gyro_bias = 1e-8;   // (rad/s)^2 * Hz
  double accel_bias = 1e-7;  // (m/s^2)^2 * Hz
};

/// Continuous-time rate f(x, u, 0) over the full error dimension; window-pose
/// rows are zero. Layout matches BlockLayout.
VecX f_model(const FullState& state, const ImuSample& u);

/// One discrete step x boxplus (f dt), with an explicit noise increment
/// eta = [eta_gyro, eta_accel, eta_bg, eta_ba] (12-dim). The zero-increment
/// call is the mean propagation; the jacobian F_w below differentiates
/// through this entry point.
FullState propagate_mean(const FullState& state, const ImuSample& u, double dt,
                         const Eigen::Matrix<double, 12, 1>& eta);

/// Analytic error-state Jacobians of the discrete step. F_x is dim x dim with
/// identity on window blocks; F_w is dim x 12.
void propagation_jacobians(const FullState& state, const ImuSample& u, double dt,
                           MatX& f_x, MatX& f_w);

/// Advances state and covariance by one IMU sample. Throws on dt <= 0 or
/// dimension mismatch. Window blocks of the covariance are untouched by the
/// noise term.
void propagate(FullState& state, MatX& cov, const ImuSample& u, double dt,
               const NoiseParams& noise);

struct StaticInitResult {
  Vec3 gravity = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  bool motion_warning = false;
};

/// Stationary-stream initialization: gyro bias from the mean rate, gravity
/// as -mean(a) in the first-IMU-frame convention. Requires >= 100 samples;
/// excessive sample variance only sets the warning flag.
StaticInitResult static_initialize(std::span<const ImuSample> samples);

}  // namespace dalio
