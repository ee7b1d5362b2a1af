#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace wheelnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Skew-symmetric matrix such that skew(u) * w == u.cross(w).
inline Mat3 skew(const Vec3& u) {
  Mat3 m;
  m << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return m;
}

/// Inverse of skew(); only the antisymmetric part of m is read.
inline Vec3 unskew(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

namespace detail {

// Below this angle the closed-form coefficients lose digits to cancellation
// (θ - sin θ is ~θ³/6), so a Taylor expansion to θ⁶ takes over.
inline constexpr double kSmallAngle = 1e-2;

/// Coefficients of exp(ξ^) = I + ξ^ + a (ξ^)^2 + b (ξ^)^3 for a rotation angle theta.
struct ExpCoefficients {
  double a;
  double b;
};

inline ExpCoefficients exp_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    return {0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0};
  }
  const double h = std::sin(0.5 * theta);
  return {2.0 * h * h / t2, (theta - std::sin(theta)) / (t2 * theta)};
}

}  // namespace detail

/// Rodrigues exponential of so(3).
inline Mat3 exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  // exp = I + sin(θ)/θ K + (1-cos θ)/θ² K², written through the shared a, b coefficients
  // using K³ = -θ² K.
  const auto c = detail::exp_coefficients(theta);
  return Mat3::Identity() + (1.0 - c.b * theta * theta) * k + c.a * k * k;
}

/// Nearest rotation in the Frobenius sense (polar factor), with det = +1.
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// ‖RᵀR − I‖_F, the orthogonality defect of a rotation estimate.
inline double orthogonality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

/// Right-invariant tangent vector ξ = (ξᴿ, ξᵛ, ξᵖ).
struct Tangent9 {
  Vec3 rot = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 pos = Vec3::Zero();

  static Tangent9 from_vector(const Vec9& x) {
    return {x.segment<3>(0), x.segment<3>(3), x.segment<3>(6)};
  }
  Vec9 to_vector() const {
    Vec9 x;
    x << rot, vel, pos;
    return x;
  }
};

/// Element of SE₂(3): the 5×5 matrix [R v p; 0 I₂].
class Se23 {
 public:
  Se23() = default;
  Se23(const Mat3& r, const Vec3& v, const Vec3& p) : r_(r), v_(v), p_(p) {}

  static Se23 identity() { return {}; }

  static Se23 from_matrix(const Mat5& m) {
    return {m.topLeftCorner<3, 3>(), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4)};
  }

  Mat5 matrix() const {
    Mat5 m = Mat5::Identity();
    m.topLeftCorner<3, 3>() = r_;
    m.block<3, 1>(0, 3) = v_;
    m.block<3, 1>(0, 4) = p_;
    return m;
  }

  const Mat3& rotation() const { return r_; }
  const Vec3& velocity() const { return v_; }
  const Vec3& position() const { return p_; }

  Se23 operator*(const Se23& o) const { return {r_ * o.r_, r_ * o.v_ + v_, r_ * o.p_ + p_}; }

  Se23 inverse() const {
    const Mat3 rt = r_.transpose();
    return {rt, -rt * v_, -rt * p_};
  }

 private:
  Mat3 r_ = Mat3::Identity();
  Vec3 v_ = Vec3::Zero();
  Vec3 p_ = Vec3::Zero();
};

/// ξ^ in se₂(3).
inline Mat5 hat(const Tangent9& xi) {
  Mat5 m = Mat5::Zero();
  m.topLeftCorner<3, 3>() = skew(xi.rot);
  m.block<3, 1>(0, 3) = xi.vel;
  m.block<3, 1>(0, 4) = xi.pos;
  return m;
}

/// Closed-form exponential I + ξ^ + a (ξ^)² + b (ξ^)³.
inline Se23 exp_se23(const Tangent9& xi) {
  const double theta = xi.rot.norm();
  const auto c = detail::exp_coefficients(theta);
  const Mat3 k = skew(xi.rot);
  const Mat3 k2 = k * k;
  // Rotation block of the closed form equals Rodrigues; the translation columns see the
  // left Jacobian I + a K + b K².
  const Mat3 jl = Mat3::Identity() + c.a * k + c.b * k2;
  return {exp_so3(xi.rot), jl * xi.vel, jl * xi.pos};
}

/// Inverse of exp_so3 with the angle in [0, π].
inline Vec3 log_so3(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 w = 0.5 * unskew(r - r.transpose());  // sin(θ) * axis
  const double s = w.norm();
  const double theta = std::atan2(s, c);
  if (theta < 1e-12) return w;
  if (c > -0.9) return theta / s * w;
  // Near π the antisymmetric part vanishes; the symmetric part is cos θ I + (1 - cos θ) u uᵀ.
  const Mat3 uu = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index i = 0;
  uu.diagonal().maxCoeff(&i);
  Vec3 axis = uu.col(i).normalized();
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis;
}

/// Inverse of exp_se23.
inline Tangent9 log_se23(const Se23& x) {
  const Vec3 phi = log_so3(x.rotation());
  const auto c = detail::exp_coefficients(phi.norm());
  const Mat3 k = skew(phi);
  const Mat3 jl = Mat3::Identity() + c.a * k + c.b * k * k;
  const auto lu = jl.partialPivLu();
  return {phi, lu.solve(x.velocity()), lu.solve(x.position())};
}

}  // namespace wheelnav
