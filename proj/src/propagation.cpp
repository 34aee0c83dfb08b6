#include "dalio/propagation.hpp"

#include <stdexcept>

namespace dalio {

VecX f_model(const FullState& state, const ImuSample& u) {
  VecX rate = VecX::Zero(state.error_dim());
  rate.segment<3>(BlockLayout::theta) = u.gyro - state.imu.bg;
  rate.segment<3>(BlockLayout::pos) = state.imu.vel;
  rate.segment<3>(BlockLayout::vel) = state.imu.rot * (u.accel - state.imu.ba) + state.imu.grav;
  // bias and gravity rates are zero-mean noise; window rows stay zero
  return rate;
}

FullState propagate_mean(const FullState& state, const ImuSample& u, double dt,
                         const Eigen::Matrix<double, 12, 1>& eta) {
  FullState out = state;
  const Vec3 dtheta = (u.gyro - state.imu.bg) * dt - eta.segment<3>(0);
  out.imu.rot = state.imu.rot * so3_exp(dtheta);
  out.imu.pos = state.imu.pos + state.imu.vel * dt;
  out.imu.vel = state.imu.vel + (state.imu.rot * (u.accel - state.imu.ba) + state.imu.grav) * dt -
                state.imu.rot * eta.segment<3>(3);
  out.imu.bg = state.imu.bg + eta.segment<3>(6);
  out.imu.ba = state.imu.ba + eta.segment<3>(9);
  return out;
}

void propagation_jacobians(const FullState& state, const ImuSample& u, double dt,
                           MatX& f_x, MatX& f_w) {
  const int dim = state.error_dim();
  f_x = MatX::Identity(dim, dim);
  f_w = MatX::Zero(dim, 12);

  const Vec3 psi = (u.gyro - state.imu.bg) * dt;
  const Mat3 jr = so3_right_jacobian(psi);

  f_x.block<3, 3>(BlockLayout::theta, BlockLayout::theta) = so3_exp(psi).transpose();
  f_x.block<3, 3>(BlockLayout::theta, BlockLayout::bg) = -jr * dt;
  f_x.block<3, 3>(BlockLayout::pos, BlockLayout::vel) = Mat3::Identity() * dt;
  f_x.block<3, 3>(BlockLayout::vel, BlockLayout::theta) =
      -state.imu.rot * skew(u.accel - state.imu.ba) * dt;
  f_x.block<3, 3>(BlockLayout::vel, BlockLayout::ba) = -state.imu.rot * dt;
  f_x.block<3, 3>(BlockLayout::vel, BlockLayout::grav) = Mat3::Identity() * dt;

  f_w.block<3, 3>(BlockLayout::theta, 0) = -jr;
  f_w.block<3, 3>(BlockLayout::vel, 3) = -state.imu.rot;
  f_w.block<3, 3>(BlockLayout::bg, 6) = Mat3::Identity();
  f_w.block<3, 3>(BlockLayout::ba, 9) = Mat3::Identity();
}

void propagate(FullState& state, MatX& cov, const ImuSample& u, double dt,
               const NoiseParams& noise) {
  if (dt <= 0.0) {
    throw std::invalid_argument("propagate: dt must be positive");
  }
  if (cov.rows() != state.error_dim() || cov.cols() != state.error_dim()) {
    throw std::invalid_argument("propagate: covariance dimension mismatch");
  }

  MatX f_x;
  MatX f_w;
  propagation_jacobians(state, u, dt, f_x, f_w);

  // F differs from identity only in the 18x18 IMU block, so the product is
  // applied to the IMU row/column strips; window blocks keep their bits.
  const MatX f_imu = f_x.topLeftCorner(18, 18);
  cov.topRows(18) = f_imu * cov.topRows(18);
  cov.leftCols(18) = cov.leftCols(18) * f_imu.transpose();

  Eigen::Matrix<double, 12, 1> q;
  q.segment<3>(0).setConstant(noise.gyro * dt);
  q.segment<3>(3).setConstant(noise.accel * dt);
  q.segment<3>(6).setConstant(noise.gyro_bias * dt);
  q.segment<3>(9).setConstant(noise.accel_bias * dt);
  const MatX f_w_imu = f_w.topRows(18);
  cov.topLeftCorner(18, 18) += f_w_imu * q.asDiagonal() * f_w_imu.transpose();

  cov.topLeftCorner(18, 18) =
      (0.5 * (cov.topLeftCorner(18, 18) + cov.topLeftCorner(18, 18).transpose())).eval();

  state = propagate_mean(state, u, dt, Eigen::Matrix<double, 12, 1>::Zero());
}

StaticInitResult static_initialize(std::span<const ImuSample> samples) {
  if (samples.size() < 100) {
    throw std::invalid_argument("static_initialize: need at least 100 samples");
  }
  Vec3 mean_gyro = Vec3::Zero();
  Vec3 mean_accel = Vec3::Zero();
  for (const ImuSample& s : samples) {
    mean_gyro += s.gyro;
    mean_accel += s.accel;
  }
  mean_gyro /= static_cast<double>(samples.size());
  mean_accel /= static_cast<double>(samples.size());

  double var_gyro = 0.0;
  double var_accel = 0.0;
  for (const ImuSample& s : samples) {
    var_gyro += (s.gyro - mean_gyro).squaredNorm();
    var_accel += (s.accel - mean_accel).squaredNorm();
  }
  var_gyro /= static_cast<double>(samples.size());
  var_accel /= static_cast<double>(samples.size());

  StaticInitResult result;
  result.gyro_bias = mean_gyro;
  // Global frame = first IMU frame; a stationary accelerometer reads -g.
  result.gravity = -mean_accel;
  result.motion_warning = std::sqrt(var_gyro) > 0.03 || std::sqrt(var_accel) > 0.1;
  return result;
}

}  // namespace dalio
