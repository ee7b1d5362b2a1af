#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "wheelnav/csv.hpp"
#include "wheelnav/detectors.hpp"
#include "wheelnav/iekf.hpp"

namespace wheelnav {

struct FilterConfig {
  ProcessNoise process;
  MeasurementNoise measurement;
  InitialStd initial;
  Gravity gravity;
  double init_duration = 1.0;            // s of leading stop used for alignment
  double nominal_dt = 0.01;              // s
  bool pseudo_measurements = true;       // false: dead reckoning only
  bool lateral_vertical_updates = true;  // false: drop lat/up pseudo-measurements

  void validate() const {
    process.validate();
    measurement.validate();
    initial.validate();
    if (!(init_duration > 0.0)) throw std::invalid_argument("init duration must be positive");
    if (!(nominal_dt > 0.0)) throw std::invalid_argument("nominal dt must be positive");
  }
};

struct FilterRun {
  std::vector<EstimateRow> rows;  // state at each sample time
  std::vector<Mat15> covariances; // filled when requested, aligned with rows
  std::size_t irregular_steps = 0;  // dt outside [0.5, 2] × nominal
  std::size_t updates = 0;

  TrajectoryRecord trajectory() const {
    TrajectoryRecord tr;
    tr.reserve(rows.size());
    for (const auto& r : rows) tr.push_back({r.t, r.nav.position, r.nav.rotation});
    return tr;
  }
  std::vector<FlagRow> flags() const {
    std::vector<FlagRow> f;
    f.reserve(rows.size());
    for (const auto& r : rows) f.push_back({r.t, r.flags});
    return f;
  }
};

/// Flags as the filter consumes them after the configuration's ablations.
inline MotionFlags effective_flags(const MotionFlags& z, const FilterConfig& cfg) {
  if (!cfg.pseudo_measurements) return {};
  MotionFlags out = z;
  if (!cfg.lateral_vertical_updates) out.zero_lat = out.zero_up = false;
  return out;
}

/// Align on the leading stationary window, then stream every sample through the detector
/// and the filter. The detector only ever sees raw samples.
inline FilterRun run_filter(std::span<const ImuSample> samples, MotionDetector& detector, const FilterConfig& cfg,
                            bool keep_covariances = false) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("run_filter: no samples");
  std::size_t n_init = 0;
  while (n_init < samples.size() && samples[n_init].t - samples.front().t < cfg.init_duration) ++n_init;
  if (n_init < kMinInitSamples) n_init = std::min(samples.size(), kMinInitSamples);
  FilterState fs = initialize_stationary(samples.first(n_init), cfg.gravity, cfg.initial);

  FilterRun run;
  run.rows.reserve(samples.size());
  if (keep_covariances) run.covariances.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const MotionFlags raw = detector.step(samples[k]);
    const MotionFlags z = effective_flags(raw, cfg);
    run.rows.push_back({samples[k].t, fs.nav, fs.cov.trace(), raw});
    if (keep_covariances) run.covariances.push_back(fs.cov);
    if (k + 1 == samples.size()) break;
    const double dt = samples[k + 1].t - samples[k].t;
    if (dt < 0.5 * cfg.nominal_dt || dt > 2.0 * cfg.nominal_dt) ++run.irregular_steps;
    fs = propagate(fs, samples[k], z, cfg.process, dt, cfg.gravity);
    if (z.any()) {
      fs = update(fs, stack_measurements(z, samples[k], fs.nav, cfg.measurement, cfg.gravity));
      ++run.updates;
    }
  }
  return run;
}

}  // namespace wheelnav
