#pragma once

// Simulator or CSV input → detector → filter → metrics, plus the JSON run configuration.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "wheelnav/csv.hpp"
#include "wheelnav/detectors.hpp"
#include "wheelnav/filter_runner.hpp"
#include "wheelnav/metrics.hpp"
#include "wheelnav/network.hpp"
#include "wheelnav/scenarios.hpp"
#include "wheelnav/simulator.hpp"

namespace wheelnav {

enum class DetectorKind { kOracle, kAmvd, kNetwork };

inline DetectorKind parse_detector_kind(const std::string& s) {
  if (s == "oracle") return DetectorKind::kOracle;
  if (s == "amvd") return DetectorKind::kAmvd;
  if (s == "network") return DetectorKind::kNetwork;
  throw std::invalid_argument("unknown detector '" + s + "' (oracle | amvd | network)");
}

inline std::string to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::kOracle: return "oracle";
    case DetectorKind::kAmvd: return "amvd";
    case DetectorKind::kNetwork: return "network";
  }
  return "?";
}

/// Sensor errors applied when the input is simulated. Unset noise levels fall back to the
/// filter's process noise.
struct SimulationConfig {
  std::string scenario = "mixed";
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  std::optional<double> gyro_noise;
  std::optional<double> accel_noise;
  bool random_walk = false;
  double vibration = 0.0;
};

struct RunConfig {
  // Inputs: an IMU CSV (truth optional) or, when imu_path is empty, a simulated scenario.
  std::filesystem::path imu_path;
  std::filesystem::path truth_path;
  SimulationConfig simulation;

  DetectorKind detector = DetectorKind::kOracle;
  std::filesystem::path weights_path;
  std::size_t amvd_window = kAmvdWindow;
  double amvd_gamma = kAmvdGamma;

  FilterConfig filter;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  bool simulated() const { return imu_path.empty(); }

  void validate() const {
    filter.validate();
    if (!simulated() && !std::filesystem::exists(imu_path))
      throw std::invalid_argument("IMU file not found: " + imu_path.string());
    if (!truth_path.empty() && !std::filesystem::exists(truth_path))
      throw std::invalid_argument("ground-truth file not found: " + truth_path.string());
    if (detector == DetectorKind::kOracle && !simulated() && truth_path.empty())
      throw std::invalid_argument("oracle detector on recorded data needs a ground-truth file");
    if (detector == DetectorKind::kNetwork) {
      if (weights_path.empty()) throw std::invalid_argument("network detector needs a weight file");
      if (!std::filesystem::exists(weights_path))
        throw std::invalid_argument("weight file not found: " + weights_path.string());
    }
    if (amvd_window < 2) throw std::invalid_argument("AMVD window must be >= 2");
    if (!(amvd_gamma > 0.0)) throw std::invalid_argument("AMVD threshold must be positive");
    const auto& s = simulation;
    if (s.vibration < 0.0 || s.gyro_noise.value_or(0.0) < 0.0 || s.accel_noise.value_or(0.0) < 0.0)
      throw std::invalid_argument("simulation noise levels must be non-negative");
    if (output_dir.empty()) throw std::invalid_argument("output directory must be set");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!known.contains(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Vec3 vec3_from(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(where + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

/// Overlay a JSON document onto `cfg`. Relative paths are resolved against `base`.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base = {}) {
  using detail::get_if;
  detail::reject_unknown_keys(j,
                              {"imu", "truth", "scenario", "simulation", "detector", "weights", "amvd",
                               "process_noise", "measurement_noise", "initial_std", "gravity",
                               "init_duration", "pseudo_measurements", "lateral_vertical_updates",
                               "output_dir", "seed"},
                              "config");
  auto path = [&](const char* key) {
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  if (j.contains("imu")) cfg.imu_path = path("imu");
  if (j.contains("truth")) cfg.truth_path = path("truth");
  if (j.contains("weights")) cfg.weights_path = path("weights");
  if (j.contains("output_dir")) cfg.output_dir = path("output_dir");
  get_if(j, "scenario", cfg.simulation.scenario);
  if (j.contains("detector")) cfg.detector = parse_detector_kind(j.at("detector").get<std::string>());
  get_if(j, "seed", cfg.seed);
  get_if(j, "init_duration", cfg.filter.init_duration);
  get_if(j, "pseudo_measurements", cfg.filter.pseudo_measurements);
  get_if(j, "lateral_vertical_updates", cfg.filter.lateral_vertical_updates);
  if (j.contains("gravity")) cfg.filter.gravity = Gravity(Vec3(0.0, 0.0, -j.at("gravity").get<double>()));

  if (j.contains("amvd")) {
    const auto& a = j.at("amvd");
    detail::reject_unknown_keys(a, {"window", "gamma"}, "amvd");
    get_if(a, "window", cfg.amvd_window);
    get_if(a, "gamma", cfg.amvd_gamma);
  }
  if (j.contains("process_noise")) {
    const auto& q = j.at("process_noise");
    detail::reject_unknown_keys(q, {"gyro", "accel", "gyro_bias", "accel_bias"}, "process_noise");
    auto& p = cfg.filter.process;
    get_if(q, "gyro", p.gyro);
    get_if(q, "accel", p.accel);
    get_if(q, "gyro_bias", p.gyro_bias);
    get_if(q, "accel_bias", p.accel_bias);
  }
  if (j.contains("measurement_noise")) {
    const auto& n = j.at("measurement_noise");
    detail::reject_unknown_keys(n, {"vel_velocity", "vel_accel", "ang", "lat", "up"}, "measurement_noise");
    auto& m = cfg.filter.measurement;
    get_if(n, "vel_velocity", m.vel_velocity);
    get_if(n, "vel_accel", m.vel_accel);
    get_if(n, "ang", m.ang);
    get_if(n, "lat", m.lat);
    get_if(n, "up", m.up);
  }
  if (j.contains("initial_std")) {
    const auto& s = j.at("initial_std");
    detail::reject_unknown_keys(s, {"roll_pitch", "yaw", "vel", "pos", "gyro_bias", "accel_bias"}, "initial_std");
    auto& i = cfg.filter.initial;
    get_if(s, "roll_pitch", i.roll_pitch);
    get_if(s, "yaw", i.yaw);
    get_if(s, "vel", i.vel);
    get_if(s, "pos", i.pos);
    get_if(s, "gyro_bias", i.gyro_bias);
    get_if(s, "accel_bias", i.accel_bias);
  }
  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    detail::reject_unknown_keys(s, {"gyro_bias", "accel_bias", "gyro_noise", "accel_noise", "random_walk", "vibration"},
                                "simulation");
    auto& sim = cfg.simulation;
    if (s.contains("gyro_bias")) sim.gyro_bias = detail::vec3_from(s.at("gyro_bias"), "simulation.gyro_bias");
    if (s.contains("accel_bias")) sim.accel_bias = detail::vec3_from(s.at("accel_bias"), "simulation.accel_bias");
    if (s.contains("gyro_noise")) sim.gyro_noise = s.at("gyro_noise").get<double>();
    if (s.contains("accel_noise")) sim.accel_noise = s.at("accel_noise").get<double>();
    get_if(s, "random_walk", sim.random_walk);
    get_if(s, "vibration", sim.vibration);
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  RunConfig cfg;
  apply_json(cfg, j, path.parent_path());
  return cfg;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"m_ate", r.m_ate},         {"aligned_m_ate", r.aligned_m_ate}, {"final_distance", r.final_distance},
          {"length", r.length},       {"duration", r.duration},           {"matched", r.matched},
          {"unmatched", r.unmatched}, {"alignment_degenerate", r.alignment_degenerate}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!(out << text)) throw std::runtime_error("cannot write " + path.string());
}

/// metrics.txt (key=value) and metrics.json side by side.
inline void write_metrics(const std::filesystem::path& dir, const MetricsReport& r) {
  write_text(dir / "metrics.txt", r.to_text());
  write_text(dir / "metrics.json", to_json(r).dump(2) + "\n");
}

/// Inputs ready for the detector and filter.
struct PipelineInput {
  std::vector<ImuSample> imu;
  std::optional<TrajectoryRecord> truth;
  std::vector<MotionFlags> truth_flags;  // per IMU sample, when known
  std::vector<GroundTruthSample> simulated;  // empty for recorded input
  std::vector<std::string> warnings;
};

inline ImuCorruption corruption_for(const RunConfig& cfg) {
  const auto& s = cfg.simulation;
  const auto& q = cfg.filter.process;
  ImuCorruption c = ImuCorruption::from_process_noise(q, s.gyro_bias, s.accel_bias, cfg.seed, s.random_walk);
  if (s.gyro_noise) c.gyro_noise = *s.gyro_noise;
  if (s.accel_noise) c.accel_noise = *s.accel_noise;
  c.vibration = s.vibration;
  return c;
}

inline PipelineInput load_input(const RunConfig& cfg) {
  PipelineInput in;
  if (cfg.simulated()) {
    in.simulated = generate_truth(scenarios::by_name(cfg.simulation.scenario));
    in.imu = corrupt(in.simulated, corruption_for(cfg));
    TrajectoryRecord tr;
    tr.reserve(in.simulated.size());
    for (const auto& s : in.simulated) {
      tr.push_back({s.t, s.position, s.rotation});
      in.truth_flags.push_back(s.flags);
    }
    in.truth = std::move(tr);
    return in;
  }
  in.imu = read_imu_csv(cfg.imu_path);
  if (in.imu.empty()) throw std::runtime_error(cfg.imu_path.string() + ": no samples");
  if (cfg.truth_path.empty()) return in;

  const auto log = read_ground_truth_csv(cfg.truth_path);
  in.warnings = log.warnings;
  in.truth = log.trajectory();
  if (cfg.detector != DetectorKind::kOracle) return in;
  // Oracle labels need a truth row at every IMU timestamp.
  const double tol = 0.5 * std::max(median_step(*in.truth), 1e-9);
  for (const auto& s : in.imu) {
    auto it = std::lower_bound(log.rows.begin(), log.rows.end(), s.t - tol,
                               [](const GroundTruthRow& r, double t) { return r.t < t; });
    if (it == log.rows.end() || std::abs(it->t - s.t) > tol)
      throw std::runtime_error("oracle detector: no ground-truth row at t=" + csv::fmt(s.t));
    if (it->flags) {
      in.truth_flags.push_back(*it->flags);
    } else if (it->velocity && it->omega) {
      in.truth_flags.push_back(oracle_labels(*it->velocity, *it->omega, it->rotation));
    } else {
      throw std::runtime_error("oracle detector: ground truth carries neither flags nor velocity/omega");
    }
  }
  return in;
}

inline std::unique_ptr<MotionDetector> make_detector(const RunConfig& cfg, const PipelineInput& in,
                                                     std::shared_ptr<const DetectorWeights> weights) {
  switch (cfg.detector) {
    case DetectorKind::kOracle: return std::make_unique<ReplayDetector>(in.truth_flags);
    case DetectorKind::kAmvd: return std::make_unique<AmvdDetector>(cfg.amvd_window, cfg.amvd_gamma);
    case DetectorKind::kNetwork: return std::make_unique<NetworkDetector>(std::move(weights));
  }
  throw std::logic_error("unhandled detector kind");
}

struct PipelineResult {
  FilterRun run;
  std::optional<MetricsReport> metrics;
  std::vector<std::string> warnings;
};

/// Full run. Everything that can fail on bad input (config, weights, CSV parsing,
/// alignment) is done before the first output file is written.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  std::shared_ptr<const DetectorWeights> weights;
  if (cfg.detector == DetectorKind::kNetwork)
    weights = std::make_shared<const DetectorWeights>(load_weights(cfg.weights_path));

  PipelineInput in = load_input(cfg);
  auto detector = make_detector(cfg, in, weights);

  PipelineResult res;
  res.warnings = in.warnings;
  res.run = run_filter(in.imu, *detector, cfg.filter);
  if (in.truth) res.metrics = evaluate_trajectory(res.run.trajectory(), *in.truth);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  if (!in.simulated.empty()) {
    write_imu_csv(cfg.output_dir / "imu.csv", in.imu);
    write_ground_truth_csv(cfg.output_dir / "truth.csv", in.simulated);
  }
  write_estimate_csv(cfg.output_dir / "estimate.csv", res.run.rows);
  write_flags_csv(cfg.output_dir / "flags.csv", res.run.flags());
  if (res.metrics) write_metrics(cfg.output_dir, *res.metrics);
  return res;
}

}  // namespace wheelnav
