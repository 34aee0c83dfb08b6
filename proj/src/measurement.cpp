#include "dalio/measurement.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dalio {

Vec6 change_term(const Mat3& rot_new, const Vec3& pos_new, const Mat3& rot_old,
                 const Vec3& pos_old) {
  Vec6 delta;
  delta.head<3>() = so3_log(rot_old.transpose() * rot_new);
  delta.tail<3>() = pos_new - pos_old;
  return delta;
}

double residual(const Mat3& owner_rot, const Vec3& owner_pos, const Measurement& m,
                const Extrinsics& ext) {
  const Vec3 d = imu_frame_point(m, ext);
  return m.normal.dot(owner_rot * d + owner_pos - m.anchor);
}

PoseChain PoseChain::of(const FullState& state) {
  PoseChain chain;
  chain.rot.reserve(1 + state.window_size());
  chain.pos.reserve(1 + state.window_size());
  chain.rot.push_back(state.imu.rot);
  chain.pos.push_back(state.imu.pos);
  for (int i = 0; i < state.window_size(); ++i) {
    const WindowPose& pose = state.window_pose(i);
    chain.rot.push_back(pose.rot);
    chain.pos.push_back(pose.pos);
  }
  return chain;
}

RowX jacobian_row(const PoseChain& chain, const Measurement& m, const Extrinsics& ext,
                  const BlockLayout& layout) {
  const int n = m.owner_offset;
  if (n < 0 || n >= chain.size()) {
    throw std::invalid_argument("jacobian_row: owner offset outside pose chain");
  }
  if (chain.size() != layout.window_count() + 1) {
    throw std::invalid_argument("jacobian_row: chain does not match layout");
  }
  RowX row = RowX::Zero(layout.dim());
  const Vec3 d = imu_frame_point(m, ext);
  const Vec3 owner_point = chain.rot[n] * d;  // R_{k-N} D_j
  for (int off = 0; off <= n; ++off) {
    // Theta_{m,N} = -R_{k-m} [ R_{k-m}^T R_{k-N} D ]_x
    const Mat3 theta = -chain.rot[off] * skew(chain.rot[off].transpose() * owner_point);
    row.segment<3>(layout.chain_rot(off)) = m.normal.transpose() * theta;
    row.segment<3>(layout.chain_pos(off)) = m.normal.transpose();
  }
  return row;
}

StackedSystem stack_system(std::span<const Measurement> measurements, const FullState& state,
                           const Extrinsics& ext, const BlockLayout& layout) {
  const PoseChain chain = PoseChain::of(state);

  std::vector<int> order(measurements.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return measurements[a].owner_offset < measurements[b].owner_offset;
  });

  StackedSystem sys;
  const int rows = static_cast<int>(measurements.size());
  sys.jacobian = MatX::Zero(rows, layout.dim());
  sys.residual = VecX::Zero(rows);
  sys.noise = VecX::Zero(rows);
  sys.row_to_measurement = order;

  int prev_offset = -1;
  for (int r = 0; r < rows; ++r) {
    const Measurement& m = measurements[order[r]];
    if (m.owner_offset != prev_offset) {
      sys.group_starts.push_back(r);
      sys.group_offsets.push_back(m.owner_offset);
      prev_offset = m.owner_offset;
    }
    sys.jacobian.row(r) = jacobian_row(chain, m, ext, layout);
    sys.residual(r) = residual(chain.rot[m.owner_offset], chain.pos[m.owner_offset], m, ext);
    sys.noise(r) = m.variance;
  }
  sys.group_starts.push_back(rows);
  return sys;
}

}  // namespace dalio
