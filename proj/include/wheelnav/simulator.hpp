#pragma once

// Kinematic wheeled-vehicle trajectories and IMU corruption.
//
// Positions, heading and pitch are analytic functions of time. Each sampled velocity is the
// chord (p_{k+1} - p_k) / dt and each specific force solves the strapdown velocity step
// exactly, so first-order propagation of the true inputs reproduces the truth up to round-off.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "wheelnav/detectors.hpp"
#include "wheelnav/flags.hpp"
#include "wheelnav/iekf.hpp"
#include "wheelnav/lie.hpp"
#include "wheelnav/state.hpp"

namespace wheelnav {

struct Segment {
  enum class Kind { kStop, kStraight, kArc, kRamp, kSettle };

  Kind kind = Kind::kStop;
  double duration = 0.0;   // s
  double speed = 0.0;      // m/s cruise (horizontal for ramps)
  double yaw_rate = 0.0;   // rad/s at cruise speed (arcs)
  double grade = 0.0;      // peak dz/dx (ramps)
  double amplitude = 0.0;  // rad, pitch oscillation (settle)
  double frequency = 0.0;  // Hz (settle)

  static Segment stop(double duration) { return {Kind::kStop, duration}; }
  static Segment straight(double speed, double duration) { return {Kind::kStraight, duration, speed}; }
  static Segment arc(double speed, double yaw_rate, double duration) {
    return {Kind::kArc, duration, speed, yaw_rate};
  }
  static Segment ramp(double speed, double grade, double duration) {
    return {Kind::kRamp, duration, speed, 0.0, grade};
  }
  /// Stationary pitch oscillation decaying linearly to zero: the body rocks on its
  /// suspension after the wheels stopped.
  static Segment settle(double duration, double amplitude = 0.01, double frequency = 1.0) {
    return {Kind::kSettle, duration, 0.0, 0.0, 0.0, amplitude, frequency};
  }

  bool moving() const { return kind == Kind::kStraight || kind == Kind::kArc || kind == Kind::kRamp; }
};

struct TrajectorySpec {
  std::vector<Segment> segments;
  double rate_hz = 100.0;
  Gravity gravity;
  double peak_accel = 2.0;   // m/s², bound on speed transitions
  double initial_yaw = 0.0;  // rad, heading at t = 0
};

struct GroundTruthSample {
  double t = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 velocity = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  Vec3 omega = Vec3::Zero();  // body angular rate
  Vec3 accel = Vec3::Zero();  // body specific force
  MotionFlags flags;

  NavState nav() const { return {rotation, velocity, position, Vec3::Zero(), Vec3::Zero()}; }
};

namespace detail {


inline Mat3 heading_pitch(double yaw, double pitch) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(-pitch, Vec3::UnitY())).toRotationMatrix();
}

struct Pose {
  Vec3 p;
  double yaw;
  double pitch;
};

/// Segment with its resolved entry state and speed profile.
struct PlannedSegment {
  Segment seg;
  double t0 = 0.0;
  Vec3 p0 = Vec3::Zero();
  double yaw0 = 0.0;
  double s_in = 0.0, s_out = 0.0;
  double t_in = 0.0, t_out = 0.0;  // blend durations
  double length = 0.0;             // horizontal distance over the segment

  // Cosine blend from a to b over span T, evaluated at u ∈ [0, T]: integral of speed.
  static double blend_distance(double a, double b, double span, double u) {
    return a * u + (b - a) * (u / 2.0 - span / (2.0 * std::numbers::pi) * std::sin(std::numbers::pi * u / span));
  }

  double distance(double tau) const {
    const double T = seg.duration;
    const double s = seg.speed;
    if (tau <= 0.0) return 0.0;
    if (tau > T) return distance(T) + s_out * (tau - T);
    double d = 0.0;
    if (t_in > 0.0) {
      if (tau <= t_in) return blend_distance(s_in, s, t_in, tau);
      d = blend_distance(s_in, s, t_in, t_in);
    }
    const double cruise_end = T - t_out;
    if (tau <= cruise_end || t_out == 0.0) return d + s * (std::min(tau, cruise_end) - t_in);
    d += s * (cruise_end - t_in);
    return d + blend_distance(s, s_out, t_out, tau - cruise_end);
  }

  Pose pose(double tau) const {
    const Vec3 dir(std::cos(yaw0), std::sin(yaw0), 0.0);
    switch (seg.kind) {
      case Segment::Kind::kStop:
        return {p0, yaw0, 0.0};
      case Segment::Kind::kSettle: {
        const double u = std::clamp(tau, 0.0, seg.duration);
        const double pitch =
            seg.amplitude * std::sin(2.0 * std::numbers::pi * seg.frequency * u) * (1.0 - u / seg.duration);
        return {p0, yaw0, pitch};
      }
      case Segment::Kind::kStraight:
        return {p0 + distance(tau) * dir, yaw0, 0.0};
      case Segment::Kind::kArc: {
        const double kappa = seg.yaw_rate / seg.speed;
        const double d = distance(tau);
        if (kappa == 0.0) return {p0 + d * dir, yaw0, 0.0};
        const double yaw = yaw0 + kappa * d;
        const Vec3 off((std::sin(yaw) - std::sin(yaw0)) / kappa, (std::cos(yaw0) - std::cos(yaw)) / kappa, 0.0);
        return {p0 + off, yaw, 0.0};
      }
      case Segment::Kind::kRamp: {
        const double d = distance(tau);
        const double dz = std::min(d, length);
        const double w = 2.0 * std::numbers::pi / length;
        const double amp = seg.grade / w;  // peak slope amp*w == grade
        const double z = amp * (1.0 - std::cos(w * dz));
        const double pitch = d < length ? std::atan(seg.grade * std::sin(w * dz)) : 0.0;
        return {p0 + d * dir + Vec3(0.0, 0.0, z), yaw0, pitch};
      }
    }
    return {p0, yaw0, 0.0};
  }
};

class Planner {
 public:
  explicit Planner(const TrajectorySpec& spec) {
    if (!(spec.rate_hz > 0.0)) throw std::invalid_argument("trajectory: sample rate must be positive");
    if (spec.segments.empty()) throw std::invalid_argument("trajectory: no segments");
    if (!(spec.peak_accel > 0.0)) throw std::invalid_argument("trajectory: peak acceleration must be positive");
    const auto& segs = spec.segments;
    double t = 0.0;
    Pose cur{Vec3::Zero(), spec.initial_yaw, 0.0};
    double speed = segs.front().moving() ? segs.front().speed : 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const Segment& s = segs[i];
      const std::string where = "trajectory segment " + std::to_string(i) + ": ";
      if (!(s.duration > 0.0)) throw std::invalid_argument(where + "duration must be positive");
      if (s.speed < 0.0) throw std::invalid_argument(where + "speed must be non-negative");
      if (s.kind == Segment::Kind::kArc && !(s.speed > 0.0))
        throw std::invalid_argument(where + "arc needs a positive speed");
      if (s.kind == Segment::Kind::kRamp && !(s.speed > 0.0))
        throw std::invalid_argument(where + "ramp needs a positive speed");
      if (s.kind == Segment::Kind::kSettle && !(s.frequency >= 0.0))
        throw std::invalid_argument(where + "settle frequency must be non-negative");

      PlannedSegment p;
      p.seg = s;
      p.t0 = t;
      p.p0 = cur.p;
      p.yaw0 = cur.yaw;
      if (s.moving()) {
        p.s_in = speed;
        if (i + 1 < segs.size())
          p.s_out = segs[i + 1].moving() ? segs[i + 1].speed : 0.0;
        else
          p.s_out = s.speed;
        const double k = std::numbers::pi / (2.0 * spec.peak_accel);
        p.t_in = k * std::abs(s.speed - p.s_in);
        p.t_out = k * std::abs(s.speed - p.s_out);
        if (p.t_in + p.t_out > s.duration)
          throw std::invalid_argument(where + "too short for its speed transitions");
        if (s.speed == 0.0 && (p.s_in > 0.0 || p.s_out > 0.0))
          throw std::invalid_argument(where + "zero cruise speed with a moving neighbour");
        p.length = p.distance(s.duration);
        if (s.kind == Segment::Kind::kRamp && !(p.length > 0.0))
          throw std::invalid_argument(where + "ramp covers no distance");
        speed = p.s_out;
      } else {
        if (speed > 0.0) throw std::invalid_argument(where + "vehicle must be at rest on entry");
        speed = 0.0;
      }
      planned_.push_back(p);
      cur = p.pose(s.duration);
      t += s.duration;
    }
    total_ = t;
  }

  double duration() const { return total_; }

  /// Pose at absolute time t; beyond the end the last segment is extended.
  Pose pose(double t) const {
    auto it = std::upper_bound(planned_.begin(), planned_.end(), t,
                               [](double v, const PlannedSegment& p) { return v < p.t0; });
    const PlannedSegment& p = (it == planned_.begin()) ? planned_.front() : *(it - 1);
    return p.pose(t - p.t0);
  }

 private:
  std::vector<PlannedSegment> planned_;
  double total_ = 0.0;
};

}  // namespace detail

/// Sample a trajectory at `rate_hz`. When the total duration is not a whole number of
/// periods, a final shorter step lands exactly on the end time.
inline std::vector<GroundTruthSample> generate_truth(const TrajectorySpec& spec) {
  const detail::Planner plan(spec);
  const double period = 1.0 / spec.rate_hz;
  const double total = plan.duration();

  std::vector<double> times;
  const auto whole = static_cast<std::int64_t>(std::floor(total * spec.rate_hz + 1e-9));
  for (std::int64_t k = 0; k <= whole; ++k) times.push_back(static_cast<double>(k) * period);
  if (total - times.back() > 1e-9) times.push_back(total);
  const std::size_t n = times.size();
  // Two look-ahead instants give the chord velocity and its difference for the last sample.
  times.push_back(times.back() + period);
  times.push_back(times.back() + period);

  std::vector<detail::Pose> poses;
  poses.reserve(times.size());
  for (double t : times) poses.push_back(plan.pose(t));
  std::vector<Mat3> rot;
  rot.reserve(times.size());
  for (const auto& p : poses) rot.push_back(detail::heading_pitch(p.yaw, p.pitch));

  std::vector<Vec3> vel(n + 1);
  for (std::size_t k = 0; k <= n; ++k) vel[k] = (poses[k + 1].p - poses[k].p) / (times[k + 1] - times[k]);

  std::vector<GroundTruthSample> out(n);
  Mat3 r = rot[0];
  for (std::size_t k = 0; k < n; ++k) {
    const double dt = times[k + 1] - times[k];
    auto& s = out[k];
    s.t = times[k];
    s.rotation = r;
    s.position = poses[k].p;
    s.velocity = vel[k];
    s.omega = log_so3(rot[k].transpose() * rot[k + 1]) / dt;
    s.accel = r.transpose() * ((vel[k + 1] - vel[k]) / dt - spec.gravity.vector());
    s.flags = oracle_labels(s.velocity, s.omega, s.rotation);
    r = r * exp_so3(s.omega * dt);
    if ((k + 1) % kReorthonormalizePeriod == 0) r = project_to_rotation(r);
  }
  return out;
}

/// Sensor error model: additive bias (optionally a random walk) plus white noise.
struct ImuCorruption {
  Vec3 gyro_bias = Vec3::Zero();   // rad/s, initial
  Vec3 accel_bias = Vec3::Zero();  // m/s², initial
  double gyro_noise = 0.0;         // rad/s, per-sample std
  double accel_noise = 0.0;        // m/s², per-sample std
  double gyro_bias_walk = 0.0;     // rad/s; per-step increment std is this × dt
  double accel_bias_walk = 0.0;    // m/s²; per-step increment std is this × dt
  bool random_walk = false;
  // Extra accelerometer white noise while driving, scaled by min(1, speed / 2 m/s).
  double vibration = 0.0;
  std::uint64_t seed = 0;

  static ImuCorruption from_process_noise(const ProcessNoise& q, const Vec3& gyro_bias,
                                          const Vec3& accel_bias, std::uint64_t seed,
                                          bool random_walk = false) {
    return {gyro_bias, accel_bias, q.gyro, q.accel, q.gyro_bias, q.accel_bias, random_walk, 0.0, seed};
  }
};

/// Raw IMU log from the truth: true rates + bias + noise.
inline std::vector<ImuSample> corrupt(const std::vector<GroundTruthSample>& truth, const ImuCorruption& c) {
  if (c.gyro_noise < 0 || c.accel_noise < 0 || c.gyro_bias_walk < 0 || c.accel_bias_walk < 0 || c.vibration < 0)
    throw std::invalid_argument("corrupt: noise parameters must be non-negative");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto gauss = [&] { return Vec3(n01(rng), n01(rng), n01(rng)); };

  std::vector<ImuSample> out;
  out.reserve(truth.size());
  Vec3 bg = c.gyro_bias;
  Vec3 ba = c.accel_bias;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& g = truth[k];
    ImuSample s;
    s.t = g.t;
    s.gyro = g.omega + bg;
    s.accel = g.accel + ba;
    if (c.gyro_noise > 0) s.gyro += c.gyro_noise * gauss();
    if (c.accel_noise > 0) s.accel += c.accel_noise * gauss();
    if (c.vibration > 0) s.accel += c.vibration * std::min(1.0, g.velocity.norm() / 2.0) * gauss();
    out.push_back(s);
    if (c.random_walk && k + 1 < truth.size()) {
      const double dt = truth[k + 1].t - g.t;
      if (c.gyro_bias_walk > 0) bg += c.gyro_bias_walk * dt * gauss();
      if (c.accel_bias_walk > 0) ba += c.accel_bias_walk * dt * gauss();
    }
  }
  return out;
}

}  // namespace wheelnav
