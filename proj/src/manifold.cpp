#include "dalio/manifold.hpp"

#include <cmath>
#include <stdexcept>

namespace dalio {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

Mat3 so3_exp(const Vec3& phi) {
  if (!phi.allFinite()) {
    throw std::invalid_argument("so3_exp: non-finite rotation vector");
  }
  if (phi.isZero(0.0)) {
    return Mat3::Identity();
  }
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    // 2nd-order Taylor, exact to well below machine eps at this magnitude.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& rot) {
  const double cos_theta = std::clamp(0.5 * (rot.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 vee(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));

  if (theta < kSmallAngle) {
    return 0.5 * vee;
  }
  if (theta < M_PI - 1e-5) {
    return (0.5 * theta / std::sin(theta)) * vee;
  }

  // Near pi the vee route loses the axis; recover it from the diagonal of
  // R + R^T, anchored on the largest diagonal entry.
  const Mat3 sym = 0.5 * (rot + rot.transpose());
  int i = 0;
  sym.diagonal().maxCoeff(&i);
  const int j = (i + 1) % 3;
  const int k = (i + 2) % 3;
  Vec3 axis;
  axis(i) = std::sqrt(std::max(0.0, (sym(i, i) - cos_theta) / (1.0 - cos_theta)));
  axis(j) = sym(i, j) / ((1.0 - cos_theta) * axis(i));
  axis(k) = sym(i, k) / ((1.0 - cos_theta) * axis(i));
  axis.normalize();
  // vee still carries the sign of sin(theta) * axis; use it when nonzero.
  if (vee.dot(axis) < 0.0) {
    axis = -axis;
  }
  return theta * axis;
}

Mat3 so3_right_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() - a * k + b * k * k;
}

Mat3 so3_right_jacobian_inv(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double b =
      1.0 / (theta * theta) - 0.5 * (1.0 + std::cos(theta)) / (theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * k + b * k * k;
}

bool is_rotation(const Mat3& rot, double tol) {
  return (rot * rot.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rot.determinant() - 1.0) <= tol;
}

}  // namespace dalio
