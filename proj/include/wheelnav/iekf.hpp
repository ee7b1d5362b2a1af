#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>

#include "wheelnav/flags.hpp"
#include "wheelnav/lie.hpp"
#include "wheelnav/state.hpp"

namespace wheelnav {

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat15x12 = Eigen::Matrix<double, 15, 12>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec15 = Eigen::Matrix<double, 15, 1>;

// Error-state layout: [ξᴿ, ξᵛ, ξᵖ, e_bω, e_ba].
namespace idx {
inline constexpr int kRot = 0;
inline constexpr int kVel = 3;
inline constexpr int kPos = 6;
inline constexpr int kGyroBias = 9;
inline constexpr int kAccelBias = 12;
}  // namespace idx

/// Standard deviations of the propagation noise (w_ω, w_a, w_bω, w_ba).
struct ProcessNoise {
  double gyro = 0.01;         // rad/s
  double accel = 0.2;         // m/s²
  double gyro_bias = 0.001;   // rad/s
  double accel_bias = 0.02;   // m/s²

  void validate() const {
    if (!(gyro > 0 && accel > 0 && gyro_bias > 0 && accel_bias > 0))
      throw std::invalid_argument("process noise must be strictly positive");
  }

  Mat12 covariance() const {
    Eigen::Matrix<double, 12, 1> d;
    d << Vec3::Constant(gyro * gyro), Vec3::Constant(accel * accel),
        Vec3::Constant(gyro_bias * gyro_bias), Vec3::Constant(accel_bias * accel_bias);
    return d.asDiagonal();
  }
};

/// Standard deviations of the four pseudo-measurements.
struct MeasurementNoise {
  double vel_velocity = 1.0;  // m/s
  double vel_accel = 0.4;     // m/s²
  double ang = 0.04;          // rad/s
  double lat = 3.0;           // m/s
  double up = 3.0;            // m/s

  void validate() const {
    if (!(vel_velocity > 0 && vel_accel > 0 && ang > 0 && lat > 0 && up > 0))
      throw std::invalid_argument("measurement noise must be strictly positive");
  }
};

/// Initial error standard deviations used by the stationary alignment.
struct InitialStd {
  double roll_pitch = 0.03;  // rad
  double yaw = 0.3;          // rad
  double vel = 0.3;          // m/s
  double pos = 0.01;         // m
  double gyro_bias = 0.005;  // rad/s
  double accel_bias = 0.05;  // m/s²

  void validate() const {
    if (!(roll_pitch > 0 && yaw > 0 && vel > 0 && pos > 0 && gyro_bias > 0 && accel_bias > 0))
      throw std::invalid_argument("initial standard deviations must be strictly positive");
  }

  Mat15 covariance() const {
    Vec15 d;
    d << roll_pitch, roll_pitch, yaw, Vec3::Constant(vel), Vec3::Constant(pos),
        Vec3::Constant(gyro_bias), Vec3::Constant(accel_bias);
    return d.cwiseAbs2().asDiagonal();
  }
};

struct FilterState {
  NavState nav;
  Mat15 cov = Mat15::Zero();
  std::int64_t step_index = 0;
};

/// Rotation blocks are re-projected onto SO(3) every this many propagation steps.
inline constexpr std::int64_t kReorthonormalizePeriod = 1000;

/// State-transition Jacobian of the right-invariant error, I + A dt, linearized at the
/// pre-propagation estimate.
///
/// With z_vel set, velocity and position are held, so rows ξᵛ, ξᵖ lose every term except
/// the gyro-bias coupling (the held v, p still see the rotation error grow). With z_ang set,
/// the rotation is held: rows ξᴿ vanish and so does the whole gyro-bias column.
inline Mat15 jacobian_F(const NavState& x, const MotionFlags& z, double dt, const Gravity& g = {}) {
  const Mat3& r = x.rotation;
  Mat15 a = Mat15::Zero();
  if (!z.zero_ang) {
    a.block<3, 3>(idx::kRot, idx::kGyroBias) = -r;
    a.block<3, 3>(idx::kVel, idx::kGyroBias) = -skew(x.velocity) * r;
    a.block<3, 3>(idx::kPos, idx::kGyroBias) = -skew(x.position) * r;
  }
  if (!z.zero_vel) {
    a.block<3, 3>(idx::kVel, idx::kRot) = skew(g.vector());
    a.block<3, 3>(idx::kVel, idx::kAccelBias) = -r;
    a.block<3, 3>(idx::kPos, idx::kVel) = Mat3::Identity();
  }
  return Mat15::Identity() + a * dt;
}

/// Noise Jacobian for w = (w_ω, w_a, w_bω, w_ba), with the same flag conditioning as jacobian_F.
inline Mat15x12 jacobian_G(const NavState& x, const MotionFlags& z, double dt) {
  const Mat3& r = x.rotation;
  Mat15x12 g = Mat15x12::Zero();
  if (!z.zero_ang) {
    g.block<3, 3>(idx::kRot, 0) = r;
    g.block<3, 3>(idx::kVel, 0) = skew(x.velocity) * r;
    g.block<3, 3>(idx::kPos, 0) = skew(x.position) * r;
  }
  if (!z.zero_vel) g.block<3, 3>(idx::kVel, 3) = r;
  g.block<3, 3>(idx::kGyroBias, 6) = Mat3::Identity();
  g.block<3, 3>(idx::kAccelBias, 9) = Mat3::Identity();
  return g * dt;
}

/// Nominal-state part of the flag-conditioned propagation.
inline NavState propagate_conditioned(const NavState& x, const ImuSample& s, const MotionFlags& z,
                                      double dt, const Gravity& g = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be positive");
  const auto [omega, accel] = correct_measurement(s, x);
  NavState out = propagate_nav(x, omega, accel, dt, g);
  if (z.zero_vel) {
    out.velocity = x.velocity;
    out.position = x.position;
  }
  if (z.zero_ang) out.rotation = x.rotation;
  return out;
}

/// Propagation step: nominal state through the conditioned dynamics, covariance through
/// P⁺ = F P Fᵀ + G Q Gᵀ.
inline FilterState propagate(const FilterState& fs, const ImuSample& s, const MotionFlags& z,
                             const ProcessNoise& q, double dt, const Gravity& g = {}) {
  const Mat15 f = jacobian_F(fs.nav, z, dt, g);
  const Mat15x12 gn = jacobian_G(fs.nav, z, dt);
  FilterState out;
  out.nav = propagate_conditioned(fs.nav, s, z, dt, g);
  out.cov = f * fs.cov * f.transpose() + gn * q.covariance() * gn.transpose();
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  out.step_index = fs.step_index + 1;
  if (out.step_index % kReorthonormalizePeriod == 0)
    out.nav.rotation = project_to_rotation(out.nav.rotation);
  return out;
}

/// Stacked pseudo-measurement: observation y, prediction ŷ at the current estimate,
/// Jacobian H (of y w.r.t. the right-invariant error) and noise covariance N.
struct MeasurementStack {
  Eigen::VectorXd y;
  Eigen::VectorXd y_hat;
  Eigen::Matrix<double, Eigen::Dynamic, 15> H;
  Eigen::MatrixXd N;

  Eigen::Index rows() const { return y.size(); }
};

/// Assemble the pseudo-measurements of the active profiles in the fixed order
/// [vel(6), ang(3), lat(1), up(1)]. lat/up are dropped when zero_vel is set, since
/// zero velocity already implies them.
inline MeasurementStack stack_measurements(const MotionFlags& z, const ImuSample& s,
                                           const NavState& x, const MeasurementNoise& n,
                                           const Gravity& g = {}) {
  if (!z.any()) throw std::invalid_argument("stack_measurements: no motion profile is active");
  const bool lat = z.zero_lat && !z.zero_vel;
  const bool up = z.zero_up && !z.zero_vel;
  const Eigen::Index m = (z.zero_vel ? 6 : 0) + (z.zero_ang ? 3 : 0) + (lat ? 1 : 0) + (up ? 1 : 0);

  MeasurementStack st;
  st.y = Eigen::VectorXd::Zero(m);
  st.y_hat = Eigen::VectorXd::Zero(m);
  st.H = Eigen::Matrix<double, Eigen::Dynamic, 15>::Zero(m, 15);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(m);

  const Mat3 rt = x.rotation.transpose();
  const Vec3 body_vel = rt * x.velocity;
  Eigen::Index row = 0;
  if (z.zero_vel) {
    st.y.segment<3>(row + 3) = s.accel;
    st.y_hat.segment<3>(row) = body_vel;
    st.y_hat.segment<3>(row + 3) = x.accel_bias - rt * g.vector();
    st.H.block<3, 3>(row, idx::kVel) = rt;
    st.H.block<3, 3>(row + 3, idx::kRot) = -rt * skew(g.vector());
    st.H.block<3, 3>(row + 3, idx::kAccelBias) = Mat3::Identity();
    var.segment<3>(row).setConstant(n.vel_velocity * n.vel_velocity);
    var.segment<3>(row + 3).setConstant(n.vel_accel * n.vel_accel);
    row += 6;
  }
  if (z.zero_ang) {
    st.y.segment<3>(row) = s.gyro;
    st.y_hat.segment<3>(row) = x.gyro_bias;
    st.H.block<3, 3>(row, idx::kGyroBias) = Mat3::Identity();
    var.segment<3>(row).setConstant(n.ang * n.ang);
    row += 3;
  }
  if (lat) {
    st.y_hat(row) = body_vel(1);
    st.H.block<1, 3>(row, idx::kVel) = rt.row(1);
    var(row) = n.lat * n.lat;
    ++row;
  }
  if (up) {
    st.y_hat(row) = body_vel(2);
    st.H.block<1, 3>(row, idx::kVel) = rt.row(2);
    var(row) = n.up * n.up;
    ++row;
  }
  st.N = var.asDiagonal();
  return st;
}

namespace detail {

struct Correction {
  Eigen::VectorXd dx;
  Eigen::MatrixXd cov;
};

/// Kalman correction K = P Hᵀ (H P Hᵀ + N)⁻¹, dx = K r, P⁺ = (I − K H) P, symmetrized.
inline Correction kalman_correct(const Eigen::MatrixXd& p, const Eigen::MatrixXd& h,
                                 const Eigen::MatrixXd& n, const Eigen::VectorXd& residual) {
  if (h.rows() != residual.size() || h.cols() != p.rows() || n.rows() != h.rows())
    throw std::invalid_argument("kalman_correct: dimension mismatch");
  const Eigen::MatrixXd s = h * p * h.transpose() + n;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("innovation covariance is not positive definite");
  const Eigen::MatrixXd k = llt.solve(h * p.transpose()).transpose();
  Correction c;
  c.dx = k * residual;
  const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  c.cov = (i - k * h) * p;
  c.cov = (0.5 * (c.cov + c.cov.transpose())).eval();
  return c;
}

}  // namespace detail

/// Invariant update: ξ⁺ retracts the pose on the left, bias errors add.
inline FilterState update(const FilterState& fs, const MeasurementStack& m) {
  if (m.rows() == 0) return fs;
  if (m.y_hat.size() != m.rows()) throw std::invalid_argument("update: y and y_hat sizes differ");
  const auto c = detail::kalman_correct(fs.cov, m.H, m.N, m.y - m.y_hat);
  FilterState out = fs;
  const Tangent9 xi = Tangent9::from_vector(c.dx.head<9>());
  out.nav.set_pose(exp_se23(xi) * fs.nav.pose());
  out.nav.gyro_bias += c.dx.segment<3>(idx::kGyroBias);
  out.nav.accel_bias += c.dx.segment<3>(idx::kAccelBias);
  out.cov = c.cov;
  return out;
}

/// Minimum number of samples accepted by initialize_stationary (1 s at 100 Hz).
inline constexpr std::size_t kMinInitSamples = 100;

/// Self-alignment from a stationary window: gyro bias is the mean rate, roll and pitch
/// level the mean specific force, yaw is zero, accel bias keeps the residual along gravity.
inline FilterState initialize_stationary(std::span<const ImuSample> samples, const Gravity& g = {},
                                         const InitialStd& init = {}) {
  if (samples.size() < kMinInitSamples)
    throw std::invalid_argument("initialize_stationary: need at least " +
                                std::to_string(kMinInitSamples) + " samples, got " +
                                std::to_string(samples.size()));
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  for (const auto& s : samples) {
    gyro += s.gyro;
    accel += s.accel;
  }
  gyro /= static_cast<double>(samples.size());
  accel /= static_cast<double>(samples.size());
  const double an = accel.norm();
  if (!(an >= 9.0 && an <= 10.5))
    throw std::runtime_error("initialize_stationary: mean specific force norm " +
                             std::to_string(an) + " m/s^2 is outside [9.0, 10.5]");

  // Rotation taking the measured up direction onto world up, then stripped of its yaw.
  const Vec3 up_world = -g.vector().normalized();
  Mat3 r = Eigen::Quaterniond::FromTwoVectors(accel, up_world).toRotationMatrix();
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  r = Eigen::AngleAxisd(-yaw, Vec3::UnitZ()).toRotationMatrix() * r;

  FilterState fs;
  fs.nav.rotation = project_to_rotation(r);
  fs.nav.gyro_bias = gyro;
  fs.nav.accel_bias = accel - fs.nav.rotation.transpose() * (-g.vector());
  fs.cov = init.covariance();
  return fs;
}

}  // namespace wheelnav
