// wheelnav: simulate / detect / filter / evaluate / pipeline.

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wheelnav/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wheelnav;

namespace {

struct CommonOptions {
  std::string config;
  std::string detector;
  std::string weights;
  std::string out;
  std::optional<std::uint64_t> seed;
};

// Config file first, then whatever was given on the command line.
RunConfig base_config(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.detector.empty()) cfg.detector = parse_detector_kind(o.detector);
  if (!o.weights.empty()) cfg.weights_path = o.weights;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

void add_common(CLI::App* sub, CommonOptions& o, bool detector) {
  sub->add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out, "Output directory");
  sub->add_option("--seed", o.seed, "Random seed for simulated sensor errors");
  if (detector) {
    sub->add_option("-d,--detector", o.detector, "Motion detector")
        ->check(CLI::IsMember({"oracle", "amvd", "network"}));
    sub->add_option("-w,--weights", o.weights, "Detector weight file (network detector)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IMU-only dead reckoning for wheeled vehicles with learned motion-profile pseudo-measurements"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string scenario, imu, truth, flags, estimate;
  std::vector<double> gyro_bias, accel_bias;
  std::optional<double> gyro_noise, accel_noise, vibration;
  bool random_walk = false, no_lat_up = false, imu_only = false;

  auto* sim = app.add_subcommand("simulate", "Generate a trajectory and its corrupted IMU log");
  add_common(sim, common, false);
  sim->add_option("-s,--scenario", scenario, "Built-in trajectory")->check(CLI::IsMember(scenarios::names()));
  sim->add_option("--gyro-bias", gyro_bias, "Initial gyro bias, rad/s")->expected(3);
  sim->add_option("--accel-bias", accel_bias, "Initial accelerometer bias, m/s^2")->expected(3);
  sim->add_option("--gyro-noise", gyro_noise, "Gyro white noise per sample, rad/s");
  sim->add_option("--accel-noise", accel_noise, "Accelerometer white noise per sample, m/s^2");
  sim->add_option("--vibration", vibration, "Extra accelerometer noise while driving, m/s^2");
  sim->add_flag("--random-walk", random_walk, "Let the biases random-walk");

  auto* det = app.add_subcommand("detect", "Run a motion detector over an IMU log and write flags.csv");
  add_common(det, common, true);
  det->add_option("-i,--imu", imu, "IMU CSV")->required()->check(CLI::ExistingFile);
  det->add_option("-t,--truth", truth, "Ground-truth CSV (oracle detector)")->check(CLI::ExistingFile);

  auto* flt = app.add_subcommand("filter", "Run the filter on an IMU log with precomputed flags");
  add_common(flt, common, false);
  flt->add_option("-i,--imu", imu, "IMU CSV")->required()->check(CLI::ExistingFile);
  flt->add_option("-f,--flags", flags, "Flags CSV, one row per IMU sample")->required()->check(CLI::ExistingFile);
  flt->add_flag("--no-lat-up", no_lat_up, "Disable the lateral and vertical pseudo-measurements");
  flt->add_flag("--imu-only", imu_only, "Disable every pseudo-measurement");

  auto* ev = app.add_subcommand("evaluate", "Compare an estimate CSV with ground truth");
  ev->add_option("-e,--estimate", estimate, "Estimate CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("-t,--truth", truth, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("-o,--out", common.out, "Write metrics.txt and metrics.json here");

  auto* pipe = app.add_subcommand("pipeline", "Simulate or load, detect, filter and evaluate in one go");
  add_common(pipe, common, true);
  pipe->add_option("-s,--scenario", scenario, "Built-in trajectory when no IMU file is given")
      ->check(CLI::IsMember(scenarios::names()));
  pipe->add_option("-i,--imu", imu, "IMU CSV")->check(CLI::ExistingFile);
  pipe->add_option("-t,--truth", truth, "Ground-truth CSV")->check(CLI::ExistingFile);
  pipe->add_flag("--no-lat-up", no_lat_up, "Disable the lateral and vertical pseudo-measurements");
  pipe->add_flag("--imu-only", imu_only, "Disable every pseudo-measurement");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = base_config(common);
    if (!scenario.empty()) cfg.simulation.scenario = scenario;
    if (!imu.empty()) cfg.imu_path = imu;
    if (!truth.empty()) cfg.truth_path = truth;
    if (no_lat_up) cfg.filter.lateral_vertical_updates = false;
    if (imu_only) cfg.filter.pseudo_measurements = false;

    if (*sim) {
      if (gyro_bias.size() == 3) cfg.simulation.gyro_bias = Vec3(gyro_bias[0], gyro_bias[1], gyro_bias[2]);
      if (accel_bias.size() == 3) cfg.simulation.accel_bias = Vec3(accel_bias[0], accel_bias[1], accel_bias[2]);
      if (gyro_noise) cfg.simulation.gyro_noise = gyro_noise;
      if (accel_noise) cfg.simulation.accel_noise = accel_noise;
      if (vibration) cfg.simulation.vibration = *vibration;
      if (random_walk) cfg.simulation.random_walk = true;
      cfg.imu_path.clear();
      cfg.validate();
      const auto gt = generate_truth(scenarios::by_name(cfg.simulation.scenario));
      const auto samples = corrupt(gt, corruption_for(cfg));
      write_imu_csv(cfg.output_dir / "imu.csv", samples);
      write_ground_truth_csv(cfg.output_dir / "truth.csv", gt);
      std::cout << "wrote " << samples.size() << " samples to " << cfg.output_dir.string() << '\n';
    } else if (*det) {
      cfg.validate();
      std::shared_ptr<const DetectorWeights> weights;
      if (cfg.detector == DetectorKind::kNetwork)
        weights = std::make_shared<const DetectorWeights>(load_weights(cfg.weights_path));
      const auto in = load_input(cfg);
      print_warnings(in.warnings);
      auto d = make_detector(cfg, in, weights);
      std::vector<FlagRow> rows;
      rows.reserve(in.imu.size());
      for (const auto& s : in.imu) rows.push_back({s.t, d->step(s)});
      write_flags_csv(cfg.output_dir / "flags.csv", rows);
      std::cout << "wrote " << rows.size() << " flag rows to " << (cfg.output_dir / "flags.csv").string() << '\n';
    } else if (*flt) {
      cfg.filter.validate();
      const auto samples = read_imu_csv(cfg.imu_path);
      const auto fr = read_flags_csv(flags);
      if (fr.size() != samples.size())
        throw std::runtime_error("flags file has " + std::to_string(fr.size()) + " rows, IMU log has " +
                                 std::to_string(samples.size()));
      std::vector<MotionFlags> z;
      z.reserve(fr.size());
      for (std::size_t k = 0; k < fr.size(); ++k) {
        if (std::abs(fr[k].t - samples[k].t) > 1e-9)
          throw std::runtime_error("flags row " + std::to_string(k + 1) + " does not match the IMU timestamp");
        z.push_back(fr[k].flags);
      }
      ReplayDetector replay(std::move(z));
      const auto run = run_filter(samples, replay, cfg.filter);
      write_estimate_csv(cfg.output_dir / "estimate.csv", run.rows);
      std::cout << "wrote " << run.rows.size() << " estimates to " << (cfg.output_dir / "estimate.csv").string()
                << " (" << run.updates << " updates)\n";
    } else if (*ev) {
      const auto gt_log = read_ground_truth_csv(truth);
      print_warnings(gt_log.warnings);
      const auto report = evaluate_trajectory(read_trajectory_csv(estimate), gt_log.trajectory());
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        write_metrics(common.out, report);
      }
      std::cout << report.to_text();
    } else if (*pipe) {
      const auto res = run_pipeline(cfg);
      print_warnings(res.warnings);
      if (res.metrics) std::cout << res.metrics->to_text();
      std::cout << "outputs in " << cfg.output_dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
