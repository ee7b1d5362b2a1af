#pragma once

#include <stdexcept>
#include <utility>

#include "wheelnav/lie.hpp"

namespace wheelnav {

/// Pose, velocity and IMU biases. rotation maps body to world; world is z-up.
struct NavState {
  Mat3 rotation = Mat3::Identity();
  Vec3 velocity = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();

  Se23 pose() const { return {rotation, velocity, position}; }
  void set_pose(const Se23& x) {
    rotation = x.rotation();
    velocity = x.velocity();
    position = x.position();
  }

  bool finite() const {
    return rotation.allFinite() && velocity.allFinite() && position.allFinite() &&
           gyro_bias.allFinite() && accel_bias.allFinite();
  }
};

struct ImuSample {
  double t = 0.0;          // s
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s², specific force
};

/// World-frame gravity vector. A level IMU at rest reads accel ≈ -g.
class Gravity {
 public:
  Gravity() = default;
  explicit Gravity(const Vec3& g) : g_(g) {
    const double n = g.norm();
    if (!(n >= 9.7 && n <= 9.9)) throw std::invalid_argument("gravity norm outside [9.7, 9.9] m/s^2");
  }
  const Vec3& vector() const { return g_; }

 private:
  Vec3 g_{0.0, 0.0, -9.81};
};

/// One first-order strapdown step with bias-corrected rates:
/// R⁺ = R exp(ω dt), v⁺ = v + (R a + g) dt, p⁺ = p + v dt. Biases are carried through.
inline NavState propagate_nav(const NavState& x, const Vec3& omega, const Vec3& accel, double dt,
                              const Gravity& gravity = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_nav: dt must be positive");
  NavState out = x;
  out.rotation = x.rotation * exp_so3(omega * dt);
  out.velocity = x.velocity + (x.rotation * accel + gravity.vector()) * dt;
  out.position = x.position + x.velocity * dt;
  return out;
}

/// Subtract the estimated biases from a raw sample: (gyro - b_ω, accel - b_a).
inline std::pair<Vec3, Vec3> correct_measurement(const ImuSample& s, const NavState& x) {
  return {s.gyro - x.gyro_bias, s.accel - x.accel_bias};
}

}  // namespace wheelnav
