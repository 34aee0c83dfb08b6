#include "dalio/state.hpp"

#include <stdexcept>

namespace dalio {

const WindowPose& FullState::window_pose(int idx) const {
  const int na = static_cast<int>(active.size());
  if (idx < 0 || idx >= window_size()) {
    throw std::out_of_range("FullState::window_pose: bad index");
  }
  return idx < na ? active[idx] : fixed[idx - na];
}

WindowPose& FullState::window_pose(int idx) {
  const int na = static_cast<int>(active.size());
  if (idx < 0 || idx >= window_size()) {
    throw std::out_of_range("FullState::window_pose: bad index");
  }
  return idx < na ? active[idx] : fixed[idx - na];
}

BlockLayout BlockLayout::of(const FullState& state) {
  BlockLayout layout;
  layout.n_active = static_cast<int>(state.active.size());
  layout.n_fixed = static_cast<int>(state.fixed.size());
  return layout;
}

namespace {

// Exact no-op for exactly-zero blocks keeps untouched states bit-identical
// through Schmidt updates.
Mat3 rot_plus(const Mat3& rot, const Eigen::Ref<const Vec3>& dtheta) {
  if (dtheta.isZero(0.0)) {
    return rot;
  }
  return rot * so3_exp(dtheta);
}

Vec3 vec_plus(const Vec3& v, const Eigen::Ref<const Vec3>& dv) {
  if (dv.isZero(0.0)) {
    return v;
  }
  return v + dv;
}

}  // namespace

FullState boxplus(const FullState& x, const VecX& delta) {
  if (delta.size() != x.error_dim()) {
    throw std::invalid_argument("boxplus: delta length does not match error dimension");
  }
  FullState out = x;
  out.imu.rot = rot_plus(x.imu.rot, delta.segment<3>(BlockLayout::theta));
  out.imu.pos = vec_plus(x.imu.pos, delta.segment<3>(BlockLayout::pos));
  out.imu.vel = vec_plus(x.imu.vel, delta.segment<3>(BlockLayout::vel));
  out.imu.bg = vec_plus(x.imu.bg, delta.segment<3>(BlockLayout::bg));
  out.imu.ba = vec_plus(x.imu.ba, delta.segment<3>(BlockLayout::ba));
  out.imu.grav = vec_plus(x.imu.grav, delta.segment<3>(BlockLayout::grav));
  const BlockLayout layout = BlockLayout::of(x);
  for (int i = 0; i < layout.window_count(); ++i) {
    WindowPose& pose = out.window_pose(i);
    pose.rot = rot_plus(pose.rot, delta.segment<3>(layout.window(i)));
    pose.pos = vec_plus(pose.pos, delta.segment<3>(layout.window(i) + 3));
  }
  return out;
}

VecX boxminus(const FullState& a, const FullState& b) {
  if (a.window_size() != b.window_size()) {
    throw std::invalid_argument("boxminus: window shapes differ");
  }
  VecX delta = VecX::Zero(a.error_dim());
  delta.segment<3>(BlockLayout::theta) = so3_log(b.imu.rot.transpose() * a.imu.rot);
  delta.segment<3>(BlockLayout::pos) = a.imu.pos - b.imu.pos;
  delta.segment<3>(BlockLayout::vel) = a.imu.vel - b.imu.vel;
  delta.segment<3>(BlockLayout::bg) = a.imu.bg - b.imu.bg;
  delta.segment<3>(BlockLayout::ba) = a.imu.ba - b.imu.ba;
  delta.segment<3>(BlockLayout::grav) = a.imu.grav - b.imu.grav;
  const BlockLayout layout = BlockLayout::of(a);
  for (int i = 0; i < layout.window_count(); ++i) {
    const WindowPose& pa = a.window_pose(i);
    const WindowPose& pb = b.window_pose(i);
    delta.segment<3>(layout.window(i)) = so3_log(pb.rot.transpose() * pa.rot);
    delta.segment<3>(layout.window(i) + 3) = pa.pos - pb.pos;
  }
  return delta;
}

namespace {

// Rebuilds the covariance with a 6-wide block inserted at `at`, whose rows and
// columns replicate the rows/columns starting at `src` of the old matrix.
MatX insert_cloned_block(const MatX& cov, int at, int src) {
  const int n = static_cast<int>(cov.rows());
  MatX out(n + 6, n + 6);
  auto old_index = [&](int i) { return i < at ? i : i - 6; };
  for (int i = 0; i < n + 6; ++i) {
    const bool ri = i >= at && i < at + 6;
    const int oi = ri ? src + (i - at) : old_index(i);
    for (int j = 0; j < n + 6; ++j) {
      const bool rj = j >= at && j < at + 6;
      const int oj = rj ? src + (j - at) : old_index(j);
      out(i, j) = cov(oi, oj);
    }
  }
  return out;
}

MatX erase_block(const MatX& cov, int at, int width) {
  const int n = static_cast<int>(cov.rows());
  MatX out(n - width, n - width);
  auto old_index = [&](int i) { return i < at ? i : i + width; };
  for (int i = 0; i < n - width; ++i) {
    for (int j = 0; j < n - width; ++j) {
      out(i, j) = cov(old_index(i), old_index(j));
    }
  }
  return out;
}

}  // namespace

void augment_clone(FullState& state, MatX& cov, const WindowConfig& config, long scan_index) {
  if (static_cast<int>(state.active.size()) >= config.s_a + 1) {
    throw std::runtime_error("augment_clone: active window overflow");
  }
  if (cov.rows() != state.error_dim()) {
    throw std::invalid_argument("augment_clone: covariance dimension mismatch");
  }
  WindowPose clone;
  clone.rot = state.imu.rot;
  clone.pos = state.imu.pos;
  clone.role = PoseRole::Active;
  clone.scan_index = scan_index;
  state.active.insert(state.active.begin(), clone);
  // The IMU pose error block spans columns [theta, pos] = [0, 6); the clone
  // lands at the first window slot.
  cov = insert_cloned_block(cov, 18, 0);
}

void marginalize_drop(FullState& state, MatX& cov, int window_idx) {
  if (window_idx < 0 || window_idx >= state.window_size()) {
    throw std::out_of_range("marginalize_drop: bad window index");
  }
  const int na = static_cast<int>(state.active.size());
  if (window_idx < na) {
    state.active.erase(state.active.begin() + window_idx);
  } else {
    state.fixed.erase(state.fixed.begin() + (window_idx - na));
  }
  cov = erase_block(cov, 18 + 6 * window_idx, 6);
}

void transfer_to_fixed(FullState& state, MatX& cov, const WindowConfig& config) {
  if (state.active.empty()) {
    throw std::runtime_error("transfer_to_fixed: no active pose");
  }
  if (config.s_f <= 0) {
    // No fixed capacity: transferring degenerates to dropping the pose.
    marginalize_drop(state, cov, static_cast<int>(state.active.size()) - 1);
    return;
  }
  if (static_cast<int>(state.fixed.size()) >= config.s_f) {
    // FIFO eviction: the oldest fixed pose is the last window block.
    marginalize_drop(state, cov, state.window_size() - 1);
  }
  WindowPose pose = state.active.back();
  state.active.pop_back();
  pose.role = PoseRole::Fixed;
  // The oldest active block is adjacent to the newest fixed slot, so this is
  // a pure relabel: covariance columns keep their positions.
  state.fixed.insert(state.fixed.begin(), pose);
}

}  // namespace dalio
