#pragma once

#include <random>

#include "dalio/measurement.hpp"
#include "dalio/state.hpp"
#include "dalio/types.hpp"

// Shared helpers for the unit and acceptance suites. Rotations produced here
// go through Eigen's AngleAxis so manifold checks do not lean on the code
// under test.

namespace dalio::testing {

inline Mat3 exp_ref(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle == 0.0) {
    return Mat3::Identity();
  }
  return Eigen::AngleAxisd(angle, phi / angle).toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-6) {
    v = Vec3(g(rng), g(rng), g(rng));
  }
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle = 3.0) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return exp_ref(u(rng) * random_unit(rng));
}

/// Random symmetric positive-definite matrix with unit-ish scale.
inline MatX random_spd(std::mt19937_64& rng, int dim, double jitter = 1e-3) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatX a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      a(i, j) = g(rng);
    }
  }
  MatX spd = a * a.transpose() / dim + jitter * MatX::Identity(dim, dim);
  return spd;
}

/// Random compound state with the requested window shape.
inline FullState random_state(std::mt19937_64& rng, int n_active, int n_fixed) {
  FullState state;
  state.imu.rot = random_rotation(rng);
  state.imu.pos = random_vec(rng, 2.0);
  state.imu.vel = random_vec(rng, 1.0);
  state.imu.bg = random_vec(rng, 0.01);
  state.imu.ba = random_vec(rng, 0.05);
  state.imu.grav = Vec3(0, 0, -9.81) + random_vec(rng, 0.05);
  long scan = 100;
  for (int i = 0; i < n_active; ++i) {
    WindowPose pose;
    pose.rot = random_rotation(rng);
    pose.pos = random_vec(rng, 2.0);
    pose.role = PoseRole::Active;
    pose.scan_index = --scan;
    state.active.push_back(pose);
  }
  for (int i = 0; i < n_fixed; ++i) {
    WindowPose pose;
    pose.rot = random_rotation(rng);
    pose.pos = random_vec(rng, 2.0);
    pose.role = PoseRole::Fixed;
    pose.scan_index = --scan;
    state.fixed.push_back(pose);
  }
  return state;
}

/// Random plane measurement with a consistent anchor near the owner point.
inline Measurement random_measurement(std::mt19937_64& rng, int owner_offset) {
  Measurement m;
  m.point_lidar = random_vec(rng, 5.0);
  m.owner_offset = owner_offset;
  m.normal = random_unit(rng);
  m.anchor = random_vec(rng, 5.0);
  m.variance = 0.0025;
  return m;
}

}  // namespace dalio::testing
