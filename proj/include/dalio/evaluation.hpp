#pragma once

#include <span>
#include <vector>

#include "dalio/types.hpp"

// Trajectory accuracy metrics: nearest-timestamp association and APE RMSE
// after closed-form rigid alignment.

namespace dalio {

using Trajectory = std::vector<TimedPose>;

struct PosePair {
  TimedPose gt;
  TimedPose est;
};

/// Nearest-timestamp pairing within max_dt; unmatched poses are dropped.
/// Throws when no pair survives.
std::vector<PosePair> associate(const Trajectory& gt, const Trajectory& est,
                                double max_dt = 0.02);

struct ApeResult {
  double rmse = 0.0;               // m, translational, after alignment
  Vec3 axis_rmse = Vec3::Zero();   // per-axis residual RMSE in the gt frame
  bool translation_only = false;   // alignment fell back (collinear input)
  Mat3 align_rot = Mat3::Identity();
  Vec3 align_pos = Vec3::Zero();
};

/// Least-squares rigid alignment (rotation + translation over all pairs),
/// then RMSE of the translational residuals. Needs >= 3 pairs; collinear
/// trajectories fall back to translation-only alignment and set the flag.
ApeResult ape_rmse(std::span<const PosePair> pairs);

}  // namespace dalio
