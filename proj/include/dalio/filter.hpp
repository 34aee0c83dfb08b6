#pragma once

#include <functional>

#include "dalio/measurement.hpp"
#include "dalio/state.hpp"
#include "dalio/types.hpp"

// Iterated Schmidt-Kalman update over the compound state. Fixed window poses
// are nuisance parameters: their gain rows are zeroed, so their means and
// their covariance block never change, while their cross-covariances still
// shape the gain of the updating states.

namespace dalio {

struct UpdateConfig {
  int max_iterations = 5;
  double convergence_eps = 1e-4;  // tangent-norm increment threshold
};

enum class UpdateStatus { Ok, SingularNormalMatrix };

enum class SlideDecision { None, Full, Partial };

struct UpdateReport {
  UpdateStatus status = UpdateStatus::Ok;
  int iterations = 0;
  double final_increment_norm = 0.0;
  double chi_pre = 1.0;
  double chi_post_prune = 1.0;
  double chi_post_compensate = 1.0;
  int rows_total = 0;
  int rows_pruned = 0;
  int rows_compensated = 0;
  SlideDecision slide = SlideDecision::None;
};

/// Rebuilds the stacked system at the given iterate. The pipeline
/// re-associates current-scan points here; past measurements keep their
/// frozen associations.
using SystemBuilder = std::function<StackedSystem(const FullState&)>;

/// Zeroes the fixed-pose rows of a full gain matrix.
MatX schmidt_gain(MatX gain, const BlockLayout& layout);

/// Partitioned Joseph covariance update for a Schmidt gain: the fixed-fixed
/// block is untouched (bit-identical), updating and cross blocks are reduced.
/// Equals the classic Joseph form when no fixed states are present and K_u
/// carries the consistent information-form gain.
void joseph_update(MatX& cov, const MatX& gain_u, const MatX& h, const VecX& c_diag,
                   const BlockLayout& layout);

/// Iterated update: per iteration rebuilds the system, transforms the prior
/// through the iteration Jacobian, solves the regularized normal equations,
/// zeroes fixed-state gain rows, and applies the increment on the manifold.
/// Finalizes the covariance in partitioned Joseph form. On a singular normal
/// matrix the last iterate is kept and the status reports the failure.
UpdateStatus iterated_update(FullState& state, MatX& cov, const SystemBuilder& builder,
                             const UpdateConfig& config, UpdateReport* report = nullptr);

/// Post-update sliding: clones the current pose into the window; on overflow
/// the oldest active pose is transferred to the fixed set when
/// chi_last_active < T_chi (full sliding) or dropped otherwise (partial).
SlideDecision slide(FullState& state, MatX& cov, double chi_last_active,
                    const WindowConfig& config, long scan_index);

}  // namespace dalio
