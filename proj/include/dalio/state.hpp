#pragma once

#include <optional>
#include <vector>

#include "dalio/manifold.hpp"
#include "dalio/types.hpp"

// Compound state: IMU block plus a sliding window of past poses, split into
// active (still optimized) and fixed (frozen anchors). The error covariance
// lives over the tangent space with the canonical block layout below.

namespace dalio {

struct ImuState {
  Mat3 rot = Mat3::Identity();   // global <- body
  Vec3 pos = Vec3::Zero();       // m
  Vec3 vel = Vec3::Zero();       // m/s
  Vec3 bg = Vec3::Zero();        // gyro bias, rad/s
  Vec3 ba = Vec3::Zero();        // accel bias, m/s^2
  Vec3 grav = Vec3::Zero();      // m/s^2
};

enum class PoseRole { Active, Fixed };

struct WindowPose {
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  PoseRole role = PoseRole::Active;
  long scan_index = -1;
  std::optional<double> chi;  // cached condition number, >= 1 when present
};

struct FullState {
  ImuState imu;
  std::vector<WindowPose> active;  // newest first, size <= s_a
  std::vector<WindowPose> fixed;   // newest first, size <= s_f

  int window_size() const { return static_cast<int>(active.size() + fixed.size()); }
  int error_dim() const { return 18 + 6 * window_size(); }

  /// Window pose by position in the coupling chain: index 0 is the newest
  /// active pose, actives before fixeds.
  const WindowPose& window_pose(int idx) const;
  WindowPose& window_pose(int idx);
};

struct WindowConfig {
  int s_a = 2;
  int s_f = 2;
  double chi_threshold = 1.5;           // T_chi
  double loc_threshold = 0.81915204428899180;  // T_loc = cos(35 deg)
  int max_iterations = 5;
  double convergence_eps = 1e-4;
};

/// Canonical error-state ordering:
///   [theta(3) p(3) v(3) bg(3) ba(3) g(3) | window poses newest-first, 6 each]
/// Jacobian blocks are always placed through these named ranges, never by
/// positional adjacency.
struct BlockLayout {
  int n_active = 0;
  int n_fixed = 0;

  static BlockLayout of(const FullState& state);

  int dim() const { return 18 + 6 * (n_active + n_fixed); }
  int window_count() const { return n_active + n_fixed; }

  static constexpr int theta = 0;
  static constexpr int pos = 3;
  static constexpr int vel = 6;
  static constexpr int bg = 9;
  static constexpr int ba = 12;
  static constexpr int grav = 15;

  /// Start column of window pose block idx (0 = newest active).
  int window(int idx) const { return 18 + 6 * idx; }

  /// Rotation/position column of the pose at chain offset m
  /// (m = 0 is the IMU pose, m >= 1 indexes window poses).
  int chain_rot(int m) const { return m == 0 ? theta : window(m - 1); }
  int chain_pos(int m) const { return m == 0 ? pos : window(m - 1) + 3; }

  /// Updating block = IMU + active poses; fixed block trails it.
  int updating_dim() const { return 18 + 6 * n_active; }
  int fixed_dim() const { return 6 * n_fixed; }
};

/// delta laid out per BlockLayout; rotation blocks compose on the right:
/// R boxplus dtheta = R * Exp(dtheta). Throws on dimension mismatch.
FullState boxplus(const FullState& x, const VecX& delta);

/// Inverse of boxplus for matching window shapes.
VecX boxminus(const FullState& a, const FullState& b);

/// Stochastic cloning: copies the IMU pose as the newest active pose and
/// duplicates the matching covariance rows/columns, so the clone starts
/// perfectly correlated with its source. Throws if the window is full.
void augment_clone(FullState& state, MatX& cov, const WindowConfig& config, long scan_index);

/// Deletes a window pose (chain index) and its covariance rows/columns.
void marginalize_drop(FullState& state, MatX& cov, int window_idx);

/// Relabels the oldest active pose as the newest fixed pose. Covariance is
/// untouched; if the fixed set is full its oldest member is dropped first.
void transfer_to_fixed(FullState& state, MatX& cov, const WindowConfig& config);

}  // namespace dalio
