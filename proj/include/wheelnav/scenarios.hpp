#pragma once

// Built-in trajectories shared by the CLI, the tests and the acceptance runner.

#include <stdexcept>
#include <string>
#include <vector>

#include "wheelnav/simulator.hpp"

namespace wheelnav::scenarios {

/// Vehicle at rest for the whole duration.
inline TrajectorySpec stationary(double duration = 60.0) {
  TrajectorySpec s;
  s.segments = {Segment::stop(duration)};
  return s;
}

/// 60 s mixing stops, straights, turns, a hill and a suspension settle.
inline TrajectorySpec mixed_drive() {
  TrajectorySpec s;
  s.segments = {Segment::stop(3),          Segment::straight(8, 10), Segment::arc(6, 0.2, 8),
                Segment::ramp(6, 0.05, 12), Segment::stop(4),         Segment::settle(2),
                Segment::straight(5, 9),   Segment::arc(5, -0.15, 9), Segment::stop(3)};
  return s;
}

/// About seven minutes of city-block driving that never stops between the alignment stop
/// at the start and a short stop at the end.
inline TrajectorySpec urban_no_stop() {
  TrajectorySpec s;
  s.segments = {Segment::stop(2)};
  for (int i = 0; i < 7; ++i) {
    s.segments.push_back(Segment::straight(10, 25));
    s.segments.push_back(Segment::arc(8, 0.15, 10.47));
    s.segments.push_back(Segment::straight(12, 15));
    s.segments.push_back(Segment::arc(8, -0.12, 10));
  }
  s.segments.push_back(Segment::stop(1));
  return s;
}

/// Repeated drive/stop cycles with settling; used for stop-detector evaluation.
inline TrajectorySpec stop_and_go() {
  TrajectorySpec s;
  s.segments = {Segment::stop(5)};
  for (int i = 0; i < 6; ++i) {
    s.segments.push_back(Segment::straight(6 + i, 20));
    s.segments.push_back(Segment::arc(5, 0.2, 8));
    s.segments.push_back(Segment::stop(4 + i));
    s.segments.push_back(Segment::settle(3));
  }
  return s;
}

/// Just over a minute with two turns and a mid-course stop.
inline TrajectorySpec short_loop() {
  TrajectorySpec s;
  s.segments = {Segment::stop(2),       Segment::straight(8, 15),      Segment::arc(8, 0.2, 8),
                Segment::straight(6, 10), Segment::stop(5),            Segment::straight(10, 12),
                Segment::arc(10, -0.15, 10), Segment::stop(3)};
  return s;
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"stationary", "mixed", "urban", "stop-and-go", "loop"};
  return n;
}

inline TrajectorySpec by_name(const std::string& name) {
  if (name == "stationary") return stationary();
  if (name == "mixed") return mixed_drive();
  if (name == "urban") return urban_no_stop();
  if (name == "stop-and-go") return stop_and_go();
  if (name == "loop") return short_loop();
  std::string known;
  for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scenario '" + name + "' (known: " + known + ")");
}

}  // namespace wheelnav::scenarios
