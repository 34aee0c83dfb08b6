#pragma once

#include <span>
#include <vector>

#include "dalio/state.hpp"
#include "dalio/types.hpp"

// Sliding-window point-to-plane measurement model. A measurement owned by a
// pose N scans back couples, through change terms between adjacent window
// poses, to every pose between the owner and the current state, so its
// Jacobian row has blocks at chain offsets 0..N.

namespace dalio {

struct Extrinsics {
  Mat3 rot = Mat3::Identity();  // IMU <- LiDAR
  Vec3 pos = Vec3::Zero();
};

struct Measurement {
  Vec3 point_lidar = Vec3::Zero();  // raw point, LiDAR frame, m
  int owner_offset = 0;             // 0 = current scan, 1 = newest window pose, ...
  Vec3 normal = Vec3::UnitZ();      // global plane normal, unit
  Vec3 anchor = Vec3::Zero();       // point on the plane, global, m
  double variance = 0.0025;         // noise variance c_j, m^2
};

struct StackedSystem {
  MatX jacobian;               // rows x error dim
  VecX residual;               // m
  VecX noise;                  // diagonal variances, m^2
  std::vector<int> row_to_measurement;

  int rows() const { return static_cast<int>(jacobian.rows()); }
  /// First row of each owner-offset group plus a trailing sentinel; rows are
  /// grouped because they are stacked in ascending owner order.
  std::vector<int> group_starts;
  /// Owner offset of each group (parallel to group_starts minus sentinel).
  std::vector<int> group_offsets;
};

/// Point in the IMU frame: D_j = ext.rot * d + ext.pos.
inline Vec3 imu_frame_point(const Measurement& m, const Extrinsics& ext) {
  return ext.rot * m.point_lidar + ext.pos;
}

/// Manifold difference (dtheta, dp) between adjacent poses: newer boxminus
/// older. Reconstructing the older pose from the newer one with zero error
/// reproduces it exactly.
Vec6 change_term(const Mat3& rot_new, const Vec3& pos_new, const Mat3& rot_old,
                 const Vec3& pos_old);

/// Signed point-to-plane distance at the owner pose's current iterate.
double residual(const Mat3& owner_rot, const Vec3& owner_pos, const Measurement& m,
                const Extrinsics& ext);

/// Chain of pose estimates used by the model: entry 0 is the IMU pose,
/// followed by the window poses newest-first.
struct PoseChain {
  std::vector<Mat3> rot;
  std::vector<Vec3> pos;

  static PoseChain of(const FullState& state);
  int size() const { return static_cast<int>(rot.size()); }
};

/// One row of H: e^T Theta_{m,N} in each chained rotation block and e^T in
/// each chained position block, m = 0..N; all other columns zero.
RowX jacobian_row(const PoseChain& chain, const Measurement& m, const Extrinsics& ext,
                  const BlockLayout& layout);

/// Stacks rows in deterministic order: owner offset ascending, then input
/// order. Throws if an owner offset exceeds the chain.
StackedSystem stack_system(std::span<const Measurement> measurements, const FullState& state,
                           const Extrinsics& ext, const BlockLayout& layout);

}  // namespace dalio
