#include "dalio/evaluation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dalio {

std::vector<PosePair> associate(const Trajectory& gt, const Trajectory& est, double max_dt) {
  if (gt.empty() || est.empty()) {
    throw std::invalid_argument("associate: empty trajectory");
  }
  std::vector<PosePair> pairs;
  pairs.reserve(est.size());
  std::size_t i = 0;
  for (const TimedPose& e : est) {
    while (i + 1 < gt.size() &&
           std::abs(gt[i + 1].t - e.t) <= std::abs(gt[i].t - e.t)) {
      ++i;
    }
    if (std::abs(gt[i].t - e.t) <= max_dt) {
      pairs.push_back({gt[i], e});
    }
  }
  if (pairs.empty()) {
    throw std::runtime_error("associate: no pose pairs within max_dt");
  }
  return pairs;
}

ApeResult ape_rmse(std::span<const PosePair> pairs) {
  if (pairs.size() < 3) {
    throw std::invalid_argument("ape_rmse: need at least 3 pose pairs");
  }
  const double n = static_cast<double>(pairs.size());
  Vec3 mean_gt = Vec3::Zero();
  Vec3 mean_est = Vec3::Zero();
  for (const PosePair& p : pairs) {
    mean_gt += p.gt.pos;
    mean_est += p.est.pos;
  }
  mean_gt /= n;
  mean_est /= n;

  Mat3 cross = Mat3::Zero();
  for (const PosePair& p : pairs) {
    cross += (p.gt.pos - mean_gt) * (p.est.pos - mean_est).transpose();
  }
  cross /= n;

  ApeResult result;
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(1) < 1e-9 * std::max(sigma(0), 1e-300)) {
    // Rank < 2: rotation is not determined (collinear trajectory).
    result.translation_only = true;
    result.align_rot = Mat3::Identity();
  } else {
    Mat3 s = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
      s(2, 2) = -1.0;
    }
    result.align_rot = svd.matrixU() * s * svd.matrixV().transpose();
  }
  result.align_pos = mean_gt - result.align_rot * mean_est;

  double sq_sum = 0.0;
  Vec3 axis_sq = Vec3::Zero();
  for (const PosePair& p : pairs) {
    const Vec3 residual = p.gt.pos - (result.align_rot * p.est.pos + result.align_pos);
    sq_sum += residual.squaredNorm();
    axis_sq += residual.cwiseAbs2();
  }
  result.rmse = std::sqrt(sq_sum / n);
  result.axis_rmse = (axis_sq / n).cwiseSqrt();
  return result;
}

}  // namespace dalio
