#include "dalio/filter.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace dalio {

namespace {

constexpr double kEigFloor = 1e-12;

// H^T C^-1 H and H^T C^-1 z. Rows are grouped by owner offset, and a row at
// offset N is nonzero only in columns [0,6) and [18, 18+6N), so the Gram
// product is accumulated over those strips.
void normal_terms(const StackedSystem& sys, MatX& gram, VecX& info_vec) {
  const int dim = static_cast<int>(sys.jacobian.cols());
  gram = MatX::Zero(dim, dim);
  info_vec = VecX::Zero(dim);
  if (sys.group_starts.size() < 2) {
    const MatX ht_cinv = sys.jacobian.transpose() * sys.noise.cwiseInverse().asDiagonal();
    gram = ht_cinv * sys.jacobian;
    info_vec = ht_cinv * sys.residual;
    return;
  }
  for (std::size_t gi = 0; gi + 1 < sys.group_starts.size(); ++gi) {
    const int r0 = sys.group_starts[gi];
    const int r1 = sys.group_starts[gi + 1];
    const int n = r1 - r0;
    const int offset = sys.group_offsets[gi];
    const int wcols = 6 * offset;
    const VecX cinv = sys.noise.segment(r0, n).cwiseInverse();
    const auto a = sys.jacobian.block(r0, 0, n, 6);
    const VecX cz = cinv.cwiseProduct(sys.residual.segment(r0, n));
    gram.topLeftCorner(6, 6).noalias() += a.transpose() * cinv.asDiagonal() * a;
    info_vec.head(6).noalias() += a.transpose() * cz;
    if (wcols > 0) {
      const auto b = sys.jacobian.block(r0, 18, n, wcols);
      gram.block(0, 18, 6, wcols).noalias() += a.transpose() * cinv.asDiagonal() * b;
      gram.block(18, 18, wcols, wcols).noalias() += b.transpose() * cinv.asDiagonal() * b;
      info_vec.segment(18, wcols).noalias() += b.transpose() * cz;
    }
  }
  gram.triangularView<Eigen::StrictlyLower>() = gram.transpose();
}

// Inverse through the eigendecomposition; false when numerically singular.
bool invert_spd(const MatX& m, MatX& inv) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(m);
  if (eig.info() != Eigen::Success) {
    return false;
  }
  const VecX& lambda = eig.eigenvalues();
  const double lmax = lambda(lambda.size() - 1);
  if (lmax <= 0.0 || lambda(0) < kEigFloor * lmax) {
    return false;
  }
  inv = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return true;
}

// P = J^-1 P_hat J^-T with J^-1 block-diagonal: Jr(phi) on rotation blocks
// that have moved, identity elsewhere. Applied strip-wise so unmoved blocks
// keep their bits.
void transform_prior(MatX& cov, const FullState& iterate, const FullState& anchor,
                     const BlockLayout& layout) {
  auto apply = [&cov](int col, const Mat3& jr) {
    cov.middleRows<3>(col) = jr * cov.middleRows<3>(col);
    cov.middleCols<3>(col) = cov.middleCols<3>(col) * jr.transpose();
  };
  const Vec3 phi_imu = so3_log(anchor.imu.rot.transpose() * iterate.imu.rot);
  if (!phi_imu.isZero(0.0)) {
    apply(BlockLayout::theta, so3_right_jacobian(phi_imu));
  }
  for (int i = 0; i < layout.window_count(); ++i) {
    const Vec3 phi =
        so3_log(anchor.window_pose(i).rot.transpose() * iterate.window_pose(i).rot);
    if (!phi.isZero(0.0)) {
      apply(layout.window(i), so3_right_jacobian(phi));
    }
  }
}

VecX apply_j_inv(const VecX& delta, const FullState& iterate, const FullState& anchor,
                 const BlockLayout& layout) {
  VecX out = delta;
  const Vec3 phi_imu = so3_log(anchor.imu.rot.transpose() * iterate.imu.rot);
  out.segment<3>(BlockLayout::theta) =
      so3_right_jacobian(phi_imu) * delta.segment<3>(BlockLayout::theta);
  for (int i = 0; i < layout.window_count(); ++i) {
    const Vec3 phi =
        so3_log(anchor.window_pose(i).rot.transpose() * iterate.window_pose(i).rot);
    out.segment<3>(layout.window(i)) =
        so3_right_jacobian(phi) * delta.segment<3>(layout.window(i));
  }
  return out;
}

// Joseph reduction in normal-equation terms: with K = N^-1 H^T C^-1,
// K_u H = (N^-1 G)_u and K_u C K_u^T = (N^-1 G N^-T)_uu, so no row-sized
// product is ever formed. Algebraically identical to joseph_update.
void joseph_update_info(MatX& cov, const MatX& n_inv, const MatX& gram,
                        const BlockLayout& layout) {
  const int u = layout.updating_dim();
  const int f = layout.fixed_dim();
  const MatX ng = n_inv * gram;
  const MatX m = ng.topRows(u);
  MatX corr_uu = m * cov * m.transpose();
  corr_uu.noalias() += (ng * n_inv.transpose()).topLeftCorner(u, u);
  MatX new_uu = cov.topLeftCorner(u, u) - corr_uu;
  cov.topLeftCorner(u, u) = 0.5 * (new_uu + new_uu.transpose());
  if (f > 0) {
    const MatX corr_uf = m * cov.rightCols(f);
    cov.topRightCorner(u, f) -= corr_uf;
    cov.bottomLeftCorner(f, u) = cov.topRightCorner(u, f).transpose();
  }
}

}  // namespace

MatX schmidt_gain(MatX gain, const BlockLayout& layout) {
  if (gain.rows() != layout.dim()) {
    throw std::invalid_argument("schmidt_gain: gain rows do not match error dimension");
  }
  if (layout.fixed_dim() > 0) {
    gain.bottomRows(layout.fixed_dim()).setZero();
  }
  return gain;
}

void joseph_update(MatX& cov, const MatX& gain_u, const MatX& h, const VecX& c_diag,
                   const BlockLayout& layout) {
  const int u = layout.updating_dim();
  const int f = layout.fixed_dim();
  if (gain_u.rows() != u || h.cols() != layout.dim() || cov.rows() != layout.dim()) {
    throw std::invalid_argument("joseph_update: dimension mismatch");
  }
  const MatX m = gain_u * h;  // u x dim
  MatX corr_uu = m * cov * m.transpose();
  corr_uu.noalias() += gain_u * c_diag.asDiagonal() * gain_u.transpose();
  MatX new_uu = cov.topLeftCorner(u, u) - corr_uu;
  cov.topLeftCorner(u, u) = 0.5 * (new_uu + new_uu.transpose());
  if (f > 0) {
    const MatX corr_uf = m * cov.rightCols(f);
    cov.topRightCorner(u, f) -= corr_uf;
    cov.bottomLeftCorner(f, u) = cov.topRightCorner(u, f).transpose();
  }
}

UpdateStatus iterated_update(FullState& state, MatX& cov, const SystemBuilder& builder,
                             const UpdateConfig& config, UpdateReport* report) {
  const BlockLayout layout = BlockLayout::of(state);
  if (cov.rows() != layout.dim()) {
    throw std::invalid_argument("iterated_update: covariance dimension mismatch");
  }
  const FullState anchor = state;  // propagated state the prior refers to
  FullState iterate = state;

  MatX gram;
  VecX info_vec;
  MatX prior;   // J^-1 P_hat J^-T of the last solved iteration
  MatX n_inv;
  int iterations = 0;
  double increment_norm = 0.0;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const StackedSystem sys = builder(iterate);
    if (sys.rows() == 0) {
      throw std::invalid_argument("iterated_update: empty measurement system");
    }
    normal_terms(sys, gram, info_vec);

    prior = cov;
    transform_prior(prior, iterate, anchor, layout);
    MatX prior_inv;
    bool solvable = invert_spd(prior, prior_inv);
    if (solvable) {
      const MatX normal = gram + prior_inv;
      solvable = invert_spd(normal, n_inv);
    }
    if (!solvable) {
      state = iterate;  // last iterate; covariance untouched
      if (report != nullptr) {
        report->status = UpdateStatus::SingularNormalMatrix;
        report->iterations = iterations;
      }
      return UpdateStatus::SingularNormalMatrix;
    }

    const VecX delta = boxminus(iterate, anchor);
    const VecX w = apply_j_inv(delta, iterate, anchor, layout);
    const VecX sol = n_inv * (gram * w - info_vec);
    VecX dx = sol - w;
    if (layout.fixed_dim() > 0) {
      dx.tail(layout.fixed_dim()).setZero();  // Schmidt rows carry zero gain
    }

    iterate = boxplus(iterate, dx);
    ++iterations;
    increment_norm = dx.norm();
    if (increment_norm < config.convergence_eps) {
      break;
    }
  }

  // Eq. 5 covariance with the last iteration's transformed prior and gain.
  joseph_update_info(prior, n_inv, gram, layout);
  cov = prior;
  state = iterate;
  if (report != nullptr) {
    report->status = UpdateStatus::Ok;
    report->iterations = iterations;
    report->final_increment_norm = increment_norm;
  }
  return UpdateStatus::Ok;
}

SlideDecision slide(FullState& state, MatX& cov, double chi_last_active,
                    const WindowConfig& config, long scan_index) {
  augment_clone(state, cov, config, scan_index);
  if (static_cast<int>(state.active.size()) <= config.s_a) {
    return SlideDecision::None;
  }
  state.active.back().chi = chi_last_active;
  if (chi_last_active < config.chi_threshold) {
    transfer_to_fixed(state, cov, config);
    return SlideDecision::Full;
  }
  marginalize_drop(state, cov, static_cast<int>(state.active.size()) - 1);
  return SlideDecision::Partial;
}

}  // namespace dalio
