#pragma once

#include <array>
#include <string>

namespace wheelnav {

/// Validity of the four motion profiles: zero velocity, zero angular velocity,
/// zero lateral velocity, zero upward velocity.
struct MotionFlags {
  bool zero_vel = false;
  bool zero_ang = false;
  bool zero_lat = false;
  bool zero_up = false;

  bool any() const { return zero_vel || zero_ang || zero_lat || zero_up; }
  bool operator==(const MotionFlags&) const = default;

  std::array<bool, 4> as_array() const { return {zero_vel, zero_ang, zero_lat, zero_up}; }
  static MotionFlags from_array(const std::array<bool, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

  /// "1011"-style string in profile order.
  std::string str() const {
    std::string s;
    for (bool b : as_array()) s.push_back(b ? '1' : '0');
    return s;
  }
};

inline constexpr std::array<const char*, 4> kProfileNames = {"vel", "ang", "lat", "up"};

}  // namespace wheelnav
