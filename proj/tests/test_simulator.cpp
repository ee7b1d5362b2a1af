#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "wheelnav/scenarios.hpp"
#include "wheelnav/simulator.hpp"

using namespace wheelnav;

namespace {

TrajectorySpec of(std::vector<Segment> segments) {
  TrajectorySpec t;
  t.segments = std::move(segments);
  return t;
}

TrajectorySpec single(Segment s) { return of({s}); }

double yaw_of(const Mat3& r) { return std::atan2(r(1, 0), r(0, 0)); }

}  // namespace

TEST(GenerateTruth, StopOnly) {
  const Gravity g;
  const auto gt = generate_truth(single(Segment::stop(10.0)));
  ASSERT_EQ(gt.size(), 1001u);
  for (const auto& s : gt) {
    EXPECT_EQ(s.velocity, Vec3::Zero());
    EXPECT_EQ(s.omega, Vec3::Zero());
    EXPECT_EQ(s.flags.str(), "1111");
    EXPECT_LT((s.accel + s.rotation.transpose() * g.vector()).norm(), 1e-12);
  }
  EXPECT_DOUBLE_EQ(gt.back().t, 10.0);
}

TEST(GenerateTruth, StraightLine) {
  const auto gt = generate_truth(single(Segment::straight(10.0, 10.0)));
  EXPECT_LT((gt.back().position - Vec3(100, 0, 0)).norm(), 1e-9);
  for (const auto& s : gt) {
    EXPECT_LT((s.velocity - Vec3(10, 0, 0)).norm(), 1e-9);
    EXPECT_EQ(s.flags.str(), "0111");
  }
}

TEST(GenerateTruth, HalfCircle) {
  const auto gt = generate_truth(single(Segment::arc(5.0, 0.1, std::numbers::pi / 0.1)));
  const auto& end = gt.back();
  EXPECT_NEAR(std::abs(yaw_of(end.rotation)), std::numbers::pi, 1e-6);
  EXPECT_LT((end.position - Vec3(0, 2.0 * 5.0 / 0.1, 0)).norm(), 1e-6);
  for (std::size_t k = 0; k + 1 < gt.size(); ++k) EXPECT_NEAR(gt[k].omega.z(), 0.1, 1e-9);
}

TEST(GenerateTruth, InitialYaw) {
  TrajectorySpec spec = single(Segment::straight(2.0, 5.0));
  spec.initial_yaw = std::numbers::pi / 2;
  const auto gt = generate_truth(spec);
  EXPECT_LT((gt.back().position - Vec3(0, 10, 0)).norm(), 1e-9);
}

TEST(GenerateTruth, RampPitchesAndReturnsLevel) {
  const auto gt = generate_truth(single(Segment::ramp(5.0, 0.1, 10.0)));
  double max_pitch = 0.0, max_z = 0.0;
  for (const auto& s : gt) {
    max_pitch = std::max(max_pitch, std::abs(std::asin(s.rotation(2, 0))));
    max_z = std::max(max_z, s.position.z());
  }
  EXPECT_NEAR(max_pitch, std::atan(0.1), 1e-3);
  EXPECT_GT(max_z, 0.5);
  EXPECT_LT(std::abs(gt.back().position.z()), 1e-9);
}

TEST(GenerateTruth, SettleRotatesWhileStopped) {
  const auto gt = generate_truth(of({Segment::stop(1.0), Segment::settle(2.0, 0.02, 1.5), Segment::stop(1.0)}));
  int halted_turning = 0;
  for (const auto& s : gt)
    if (s.flags.zero_vel && !s.flags.zero_ang) ++halted_turning;
  EXPECT_GT(halted_turning, 100);
}

TEST(GenerateTruth, FractionalDurationLandsOnEnd) {
  const auto gt = generate_truth(single(Segment::straight(3.0, 1.234)));
  EXPECT_DOUBLE_EQ(gt.back().t, 1.234);
  EXPECT_NEAR(gt.back().t - gt[gt.size() - 2].t, 0.004, 1e-12);
  EXPECT_LT((gt.back().position - Vec3(3.0 * 1.234, 0, 0)).norm(), 1e-9);
}

TEST(GenerateTruth, RejectsInvalidSpecs) {
  EXPECT_THROW(generate_truth({}), std::invalid_argument);
  EXPECT_THROW(generate_truth(single(Segment::stop(0.0))), std::invalid_argument);
  EXPECT_THROW(generate_truth(single(Segment::straight(-1.0, 5.0))), std::invalid_argument);
  EXPECT_THROW(generate_truth(single(Segment::arc(0.0, 0.1, 5.0))), std::invalid_argument);
  // 20 m/s in 1 s is beyond the 2 m/s² transition bound.
  EXPECT_THROW(generate_truth(of({Segment::stop(1.0), Segment::straight(20.0, 1.0)})), std::invalid_argument);
  TrajectorySpec bad_rate = single(Segment::stop(1.0));
  bad_rate.rate_hz = 0.0;
  EXPECT_THROW(generate_truth(bad_rate), std::invalid_argument);
}

TEST(GenerateTruth, FlagCorrectnessOnScenarios) {
  for (const auto& name : scenarios::names()) {
    const auto gt = generate_truth(scenarios::by_name(name));
    for (const auto& s : gt) {
      EXPECT_EQ(s.flags, oracle_labels(s.velocity, s.omega, s.rotation));
      if (s.velocity.norm() == 0.0 && s.omega.norm() == 0.0) {
        EXPECT_EQ(s.flags.str(), "1111") << name << " " << s.t;
      }
    }
  }
}

TEST(GenerateTruth, SpecificForceClosesStrapdownStep) {
  const Gravity g;
  const auto gt = generate_truth(scenarios::mixed_drive());
  for (std::size_t k = 0; k + 1 < gt.size(); ++k) {
    const double dt = gt[k + 1].t - gt[k].t;
    const Vec3 want = gt[k].rotation.transpose() * ((gt[k + 1].velocity - gt[k].velocity) / dt - g.vector());
    ASSERT_LT((gt[k].accel - want).norm(), 1e-9) << k;
  }
}

// Finite-differenced position reproduces velocity to first order.
TEST(GenerateTruth, KinematicConsistency) {
  const auto gt = generate_truth(scenarios::mixed_drive());
  for (std::size_t k = 0; k + 1 < gt.size(); ++k) {
    const double dt = gt[k + 1].t - gt[k].t;
    ASSERT_LT(((gt[k + 1].position - gt[k].position) / dt - gt[k].velocity).norm(), 1e-9) << k;
  }
}

TEST(GenerateTruth, RotationsStayOrthonormal) {
  for (const auto& s : generate_truth(scenarios::urban_no_stop())) {
    ASSERT_LT(orthogonality_error(s.rotation), 1e-9);
    ASSERT_NEAR(s.rotation.determinant(), 1.0, 1e-9);
  }
}

TEST(Closure, PropagationReproducesTruth) {
  const auto gt = generate_truth(scenarios::mixed_drive());
  NavState x = gt.front().nav();
  double worst_p = 0.0, worst_v = 0.0, worst_r = 0.0;
  for (std::size_t k = 0; k + 1 < gt.size(); ++k) {
    x = propagate_nav(x, gt[k].omega, gt[k].accel, gt[k + 1].t - gt[k].t);
    worst_p = std::max(worst_p, (x.position - gt[k + 1].position).norm());
    worst_v = std::max(worst_v, (x.velocity - gt[k + 1].velocity).norm());
    worst_r = std::max(worst_r, (x.rotation - gt[k + 1].rotation).cwiseAbs().maxCoeff());
  }
  EXPECT_GE(gt.back().t, 60.0);
  EXPECT_LT(worst_p, 1e-6);
  EXPECT_LT(worst_v, 1e-6);
  EXPECT_LT(worst_r, 1e-6);
}

TEST(Corrupt, ZeroCorruptionIsExact) {
  const auto gt = generate_truth(scenarios::short_loop());
  const auto imu = corrupt(gt, {});
  ASSERT_EQ(imu.size(), gt.size());
  for (std::size_t k = 0; k < gt.size(); ++k) {
    EXPECT_EQ(imu[k].t, gt[k].t);
    EXPECT_EQ(imu[k].gyro, gt[k].omega);
    EXPECT_EQ(imu[k].accel, gt[k].accel);
  }
}

TEST(Corrupt, ConstantBias) {
  const auto gt = generate_truth(scenarios::short_loop());
  ImuCorruption c;
  c.gyro_bias = Vec3(0.01, -0.02, 0.005);
  c.accel_bias = Vec3(0.1, 0.05, -0.2);
  const auto imu = corrupt(gt, c);
  for (std::size_t k = 0; k < gt.size(); ++k) {
    EXPECT_LT((imu[k].gyro - gt[k].omega - c.gyro_bias).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((imu[k].accel - gt[k].accel - c.accel_bias).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Corrupt, NoiseStandardDeviation) {
  const auto gt = generate_truth(single(Segment::stop(100.0)));
  ASSERT_GE(gt.size(), 10000u);
  const ProcessNoise q;
  const auto imu = corrupt(gt, ImuCorruption::from_process_noise(q, Vec3::Zero(), Vec3::Zero(), 42));
  for (int axis = 0; axis < 3; ++axis) {
    double sg = 0.0, sa = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
      sg += std::pow(imu[k].gyro(axis) - gt[k].omega(axis), 2);
      sa += std::pow(imu[k].accel(axis) - gt[k].accel(axis), 2);
    }
    const double n = static_cast<double>(gt.size());
    EXPECT_NEAR(std::sqrt(sg / n), q.gyro, 0.05 * q.gyro) << axis;
    EXPECT_NEAR(std::sqrt(sa / n), q.accel, 0.05 * q.accel) << axis;
  }
}

TEST(Corrupt, BiasRandomWalkIncrementStd) {
  const auto gt = generate_truth(single(Segment::stop(100.0)));
  ImuCorruption c;
  c.gyro_bias_walk = 0.5;
  c.random_walk = true;
  c.seed = 3;
  const auto imu = corrupt(gt, c);
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k + 1 < imu.size(); ++k)
    for (int i = 0; i < 3; ++i, ++n) ss += std::pow(imu[k + 1].gyro(i) - imu[k].gyro(i), 2);
  const double want = 0.5 * 0.01;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), want, 0.05 * want);
}

TEST(Corrupt, DeterministicPerSeed) {
  const auto gt = generate_truth(scenarios::short_loop());
  auto c = ImuCorruption::from_process_noise(ProcessNoise{}, Vec3(0.001, 0, 0), Vec3(0, 0.02, 0), 9, true);
  c.vibration = 0.3;
  const auto a = corrupt(gt, c), b = corrupt(gt, c);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a[k].gyro, b[k].gyro);
    ASSERT_EQ(a[k].accel, b[k].accel);
  }
  c.seed = 10;
  const auto d = corrupt(gt, c);
  EXPECT_NE(a[5].gyro, d[5].gyro);
}

TEST(Corrupt, VibrationOnlyWhileMoving) {
  const auto gt = generate_truth(scenarios::stop_and_go());
  ImuCorruption c;
  c.vibration = 0.3;
  const auto imu = corrupt(gt, c);
  for (std::size_t k = 0; k < gt.size(); ++k)
    if (gt[k].velocity.norm() == 0.0) {
      ASSERT_EQ(imu[k].accel, gt[k].accel) << k;
    }
}

TEST(Corrupt, RejectsNegativeNoise) {
  const auto gt = generate_truth(single(Segment::stop(1.0)));
  ImuCorruption c;
  c.accel_noise = -1.0;
  EXPECT_THROW(corrupt(gt, c), std::invalid_argument);
}
