#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wheelnav/flags.hpp"
#include "wheelnav/lie.hpp"
#include "wheelnav/state.hpp"

namespace wheelnav {

/// Labeling thresholds applied to ground-truth kinematics.
struct OracleThresholds {
  double speed = 0.01;          // m/s, zero velocity
  double angular_rate = 0.005;  // rad/s, zero angular velocity
  double lateral = 0.1;         // m/s
  double upward = 0.1;          // m/s
};

/// Ground-truth motion-profile labels. Lateral/upward are body-frame components of Rᵀv
/// (body axes: x forward, y left, z up).
inline MotionFlags oracle_labels(const Vec3& velocity_w, const Vec3& omega, const Mat3& rotation,
                                 const OracleThresholds& th = {}) {
  const Vec3 vb = rotation.transpose() * velocity_w;
  return {velocity_w.norm() < th.speed, omega.norm() < th.angular_rate, std::abs(vb.y()) < th.lateral,
          std::abs(vb.z()) < th.upward};
}

/// Per-profile probability scores in [0, 1].
using ProfileScores = std::array<double, 4>;

/// flag_i = score_i >= threshold_i; a score equal to its threshold counts as detected.
inline MotionFlags threshold_scores(const ProfileScores& u, const std::array<double, 4>& thresholds) {
  return {u[0] >= thresholds[0], u[1] >= thresholds[1], u[2] >= thresholds[2], u[3] >= thresholds[3]};
}

// Moving-variance stationarity test defaults.
inline constexpr std::size_t kAmvdWindow = 100;
inline constexpr double kAmvdGamma = 1e-3;  // (m/s²)²

/// Mean of the three per-axis unbiased accelerometer variances over the window.
inline double accel_window_variance(std::span<const Vec3> window) {
  const double n = static_cast<double>(window.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& a : window) mean += a;
  mean /= n;
  Vec3 ss = Vec3::Zero();
  for (const auto& a : window) ss += (a - mean).cwiseAbs2();
  return (ss / (n - 1.0)).mean();
}

/// Stationary iff the windowed accelerometer variance falls below gamma.
/// Only the last `window_length` samples are used.
inline bool amvd_detect(std::span<const Vec3> window, double gamma = kAmvdGamma,
                        std::size_t window_length = kAmvdWindow) {
  if (window_length < 2) throw std::invalid_argument("amvd_detect: window length must be >= 2");
  if (window.size() < window_length)
    throw std::invalid_argument("amvd_detect: window shorter than " + std::to_string(window_length));
  return accel_window_variance(window.last(window_length)) < gamma;
}

/// Confusion counts and ratios for one profile.
struct ProfileConfusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  bool precision_defined = true;  // false when tp + fp == 0 (precision reported as 1)
  bool recall_defined = true;     // false when tp + fn == 0 (recall reported as 1)
};

inline ProfileConfusion confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                                              std::size_t fn) {
  ProfileConfusion c{tp, fp, tn, fn};
  c.precision_defined = tp + fp > 0;
  c.recall_defined = tp + fn > 0;
  c.precision = c.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  c.recall = c.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  return c;
}

inline std::array<ProfileConfusion, 4> evaluate_detector(std::span<const MotionFlags> predicted,
                                                         std::span<const MotionFlags> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("evaluate_detector: sequence lengths differ");
  std::array<std::array<std::size_t, 4>, 4> counts{};  // [profile][tp, fp, tn, fn]
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto p = predicted[i].as_array();
    const auto t = truth[i].as_array();
    for (int k = 0; k < 4; ++k) {
      const int slot = p[k] ? (t[k] ? 0 : 1) : (t[k] ? 3 : 2);
      ++counts[k][slot];
    }
  }
  std::array<ProfileConfusion, 4> out;
  for (int k = 0; k < 4; ++k)
    out[k] = confusion_from_counts(counts[k][0], counts[k][1], counts[k][2], counts[k][3]);
  return out;
}

/// Streaming detector consuming raw IMU samples only.
class MotionDetector {
 public:
  virtual ~MotionDetector() = default;
  virtual MotionFlags step(const ImuSample& s) = 0;
  virtual void reset() = 0;
};

/// Replays precomputed labels (e.g. ground-truth flags) in sample order.
class ReplayDetector final : public MotionDetector {
 public:
  explicit ReplayDetector(std::vector<MotionFlags> flags) : flags_(std::move(flags)) {}

  MotionFlags step(const ImuSample&) override {
    if (next_ >= flags_.size()) throw std::out_of_range("ReplayDetector: ran out of labels");
    return flags_[next_++];
  }
  void reset() override { next_ = 0; }

 private:
  std::vector<MotionFlags> flags_;
  std::size_t next_ = 0;
};

/// Causal moving-variance zero-velocity detector; only z_vel is ever raised.
class AmvdDetector final : public MotionDetector {
 public:
  explicit AmvdDetector(std::size_t window = kAmvdWindow, double gamma = kAmvdGamma)
      : window_(window), gamma_(gamma) {
    if (window_ < 2) throw std::invalid_argument("AmvdDetector: window must be >= 2");
  }

  MotionFlags step(const ImuSample& s) override {
    buf_.push_back(s.accel);
    if (buf_.size() > window_) buf_.pop_front();
    MotionFlags z;
    if (buf_.size() == window_) {
      std::vector<Vec3> w(buf_.begin(), buf_.end());
      z.zero_vel = amvd_detect(w, gamma_, window_);
    }
    return z;
  }
  void reset() override { buf_.clear(); }

 private:
  std::size_t window_;
  double gamma_;
  std::deque<Vec3> buf_;
};

}  // namespace wheelnav
