#include "dalio/degeneracy.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dalio {

namespace {
constexpr double kRankFloor = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double condition_number(const MatX& h) {
  if (h.rows() == 0 || h.cols() == 0) {
    throw std::invalid_argument("condition_number: empty matrix");
  }
  Eigen::JacobiSVD<MatX> svd(h);
  const VecX sigma = svd.singularValues();
  const double s_max = sigma(0);
  const double s_min = sigma(sigma.size() - 1);
  if (h.rows() < h.cols() || s_min < kRankFloor * s_max) {
    return kInf;
  }
  return s_max / s_min;
}

SplitJacobian split_jacobian(const StackedSystem& sys, const BlockLayout& layout) {
  if (sys.rows() == 0) {
    throw std::invalid_argument("split_jacobian: empty system");
  }
  SplitJacobian split;
  split.rot = sys.jacobian.middleCols(BlockLayout::theta, 3);
  split.pos = sys.jacobian.middleCols(BlockLayout::pos, 3);
  (void)layout;
  return split;
}

// Rotation constraint direction of a measurement, unit length (zero for a
// vanishing lever arm). Normalizing makes the T_loc cosine threshold
// meaningful for the rotation projections as well.
static Vec3 rotation_direction(const Measurement& m, const Mat3& rot_k, const Extrinsics& ext) {
  const Vec3 d = imu_frame_point(m, ext);
  const Vec3 w = (-m.normal.transpose() * rot_k * skew(d)).transpose();
  const double norm = w.norm();
  return norm > 1e-12 ? Vec3(w / norm) : Vec3::Zero();
}

LocalizabilityScores localizability(const Measurement& m, const Mat3& rot_k,
                                    const Extrinsics& ext, const Mat3& v_p, const Mat3& v_r) {
  LocalizabilityScores scores;
  scores.omega_p = (m.normal.transpose() * v_p).transpose();
  scores.omega_r = (rotation_direction(m, rot_k, ext).transpose() * v_r).transpose();
  return scores;
}

DegeneracyReport analyze_split(const SplitJacobian& split) {
  DegeneracyReport report;
  Eigen::JacobiSVD<MatX> svd_p(split.pos, Eigen::ComputeFullV);
  Eigen::JacobiSVD<MatX> svd_r(split.rot, Eigen::ComputeFullV);
  report.sigma_p = svd_p.singularValues();
  report.sigma_r = svd_r.singularValues();
  report.v_p = svd_p.matrixV();
  report.v_r = svd_r.matrixV();
  report.v_p3 = report.v_p.col(2);
  report.v_r3 = report.v_r.col(2);
  if (split.pos.rows() < 3 || report.sigma_p(2) < kRankFloor * report.sigma_p(0)) {
    report.chi = kInf;
  } else {
    report.chi = report.sigma_p(0) / report.sigma_p(2);
  }
  return report;
}

std::vector<int> prune(std::span<const Measurement> measurements,
                       std::span<const LocalizabilityScores> scores, double t_loc) {
  if (measurements.size() != scores.size()) {
    throw std::invalid_argument("prune: measurement/score count mismatch");
  }
  std::vector<int> kept;
  kept.reserve(measurements.size());
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const double best = std::max(scores[j].omega_p.cwiseAbs().maxCoeff(),
                                 scores[j].omega_r.cwiseAbs().maxCoeff());
    if (best > t_loc) {
      kept.push_back(static_cast<int>(j));
    }
  }
  return kept;
}

double position_condition_number(std::span<const Measurement> measurements) {
  if (measurements.size() < 3) {
    return kInf;
  }
  MatX normals(measurements.size(), 3);
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    normals.row(j) = measurements[j].normal.transpose();
  }
  return condition_number(normals);
}

CompensationResult compensate(std::span<const Measurement> psi_u,
                              std::span<const Measurement> fixed_candidates,
                              const DegeneracyReport& report, const Mat3& rot_k,
                              const Extrinsics& ext, double t_chi, double t_loc,
                              int batch_size) {
  CompensationResult result;
  result.selected.assign(psi_u.begin(), psi_u.end());
  result.chi_final = report.chi;
  if (report.chi < t_chi) {
    return result;
  }

  // Score candidates along the degenerate directions only (Omega^3 terms).
  std::vector<std::pair<double, int>> scored;
  for (std::size_t j = 0; j < fixed_candidates.size(); ++j) {
    const Measurement& m = fixed_candidates[j];
    const double omega_p3 = std::abs(m.normal.dot(report.v_p3));
    const double omega_r3 = std::abs(rotation_direction(m, rot_k, ext).dot(report.v_r3));
    const double score = std::max(omega_p3, omega_r3);
    if (score > t_loc) {
      scored.emplace_back(score, static_cast<int>(j));
    }
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::size_t next = 0;
  while (next < scored.size() && !(result.chi_final < t_chi)) {
    const std::size_t stop = std::min(next + static_cast<std::size_t>(batch_size), scored.size());
    for (; next < stop; ++next) {
      result.selected.push_back(fixed_candidates[scored[next].second]);
      ++result.added;
    }
    result.chi_final = position_condition_number(result.selected);
  }
  return result;
}

double degeneracy_of_state(const Mat3& pose_rot, std::span<const Measurement> owned,
                           const Extrinsics& ext) {
  if (owned.size() < 6) {
    return kInf;
  }
  MatX h(owned.size(), 6);
  for (std::size_t j = 0; j < owned.size(); ++j) {
    const Measurement& m = owned[j];
    const Vec3 d = imu_frame_point(m, ext);
    h.block<1, 3>(j, 0) = -m.normal.transpose() * pose_rot * skew(d);
    h.block<1, 3>(j, 3) = m.normal.transpose();
  }
  return condition_number(h);
}

}  // namespace dalio
