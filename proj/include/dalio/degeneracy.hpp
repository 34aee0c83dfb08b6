#pragma once

#include <span>
#include <vector>

#include "dalio/measurement.hpp"
#include "dalio/types.hpp"

// Degeneracy quantification and selective data exploitation: condition
// number, per-measurement localizability contributions, pruning of weak
// constraints, and compensation of degenerate directions with measurements
// held by fixed states.

namespace dalio {

/// Ratio of extreme singular values; +inf when sigma_min < 1e-12 * sigma_max.
/// Throws on an empty matrix.
double condition_number(const MatX& h);

/// Current-pose rotation/position columns of a stacked system.
struct SplitJacobian {
  MatX rot;  // n x 3
  MatX pos;  // n x 3
};
SplitJacobian split_jacobian(const StackedSystem& sys, const BlockLayout& layout);

struct LocalizabilityScores {
  Vec3 omega_p = Vec3::Zero();  // e^T V_p
  Vec3 omega_r = Vec3::Zero();  // unit rotation direction projected onto V_R
};

/// Projections of a measurement's constraint directions onto the singular
/// bases. The rotation lever -e^T R_k [D]_x is normalized to unit length so
/// both projections are cosines comparable against T_loc; comparisons
/// downstream use absolute values.
LocalizabilityScores localizability(const Measurement& m, const Mat3& rot_k,
                                    const Extrinsics& ext, const Mat3& v_p, const Mat3& v_r);

/// SVD summary of a split system. `chi` is the condition number of the
/// position block, the scale-free indicator used for sliding and
/// compensation decisions; sigma_p/sigma_r are the split singular values and
/// v_p3/v_r3 the least-constrained (degenerate) directions.
struct DegeneracyReport {
  double chi = 1.0;
  Vec3 sigma_p = Vec3::Zero();
  Vec3 sigma_r = Vec3::Zero();
  Mat3 v_p = Mat3::Identity();
  Mat3 v_r = Mat3::Identity();
  Vec3 v_p3 = Vec3::UnitZ();
  Vec3 v_r3 = Vec3::UnitZ();
};
DegeneracyReport analyze_split(const SplitJacobian& split);

/// Indices of measurements whose strongest localizability component exceeds
/// t_loc (Psi_u membership).
std::vector<int> prune(std::span<const Measurement> measurements,
                       std::span<const LocalizabilityScores> scores, double t_loc);

struct CompensationResult {
  std::vector<Measurement> selected;  // Psi_all = Psi_u then added candidates
  int added = 0;
  double chi_final = 1.0;
};

/// Scores fixed-state candidates against the degenerate directions of the
/// pruned system, sorts descending, and adds them in batches of
/// `batch_size`, recomputing chi after each batch, until chi < t_chi or the
/// candidates are exhausted. Psi_u is always a subset of the result.
CompensationResult compensate(std::span<const Measurement> psi_u,
                              std::span<const Measurement> fixed_candidates,
                              const DegeneracyReport& report, const Mat3& rot_k,
                              const Extrinsics& ext, double t_chi, double t_loc,
                              int batch_size = 10);

/// Condition number of a pose's own 6-column sub-Jacobian
/// [-e^T R [D]_x | e^T] over the rows it owns; +inf below 6 rows.
double degeneracy_of_state(const Mat3& pose_rot, std::span<const Measurement> owned,
                           const Extrinsics& ext);

/// Condition number of the stacked normals (position sub-Jacobian) of a
/// measurement set; +inf below 3 rows. This is the per-scan and per-state
/// degeneracy indicator compared against T_chi in the pipeline.
double position_condition_number(std::span<const Measurement> measurements);

}  // namespace dalio
