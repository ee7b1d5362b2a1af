#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wheelnav/lie.hpp"

namespace wheelnav {

struct TrajectoryPoint {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

using TrajectoryRecord = std::vector<TrajectoryPoint>;

/// Estimated/ground-truth planar positions paired by nearest timestamp.
struct Association {
  std::vector<Eigen::Vector2d> est;
  std::vector<Eigen::Vector2d> gt;
  std::size_t unmatched = 0;  // estimate samples without a partner within tolerance
};

inline double median_step(std::span<const TrajectoryPoint> tr) {
  if (tr.size() < 2) return 0.0;
  std::vector<double> d;
  d.reserve(tr.size() - 1);
  for (std::size_t i = 1; i < tr.size(); ++i) d.push_back(tr[i].t - tr[i - 1].t);
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

/// Nearest-neighbour association; `tolerance` < 0 selects half the median ground-truth step.
inline Association associate(std::span<const TrajectoryPoint> est, std::span<const TrajectoryPoint> gt,
                             double tolerance = -1.0) {
  for (std::size_t i = 1; i < gt.size(); ++i)
    if (!(gt[i].t > gt[i - 1].t)) throw std::invalid_argument("ground truth timestamps must increase");
  if (tolerance < 0.0) tolerance = gt.size() > 1 ? 0.5 * median_step(gt) : 1e-9;
  Association a;
  for (const auto& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e.t, [](const TrajectoryPoint& p, double t) { return p.t < t; });
    const TrajectoryPoint* best = nullptr;
    double gap = tolerance;
    if (it != gt.end() && std::abs(it->t - e.t) <= gap) {
      best = &*it;
      gap = std::abs(it->t - e.t);
    }
    if (it != gt.begin() && std::abs((it - 1)->t - e.t) <= gap) {
      if (!best || std::abs((it - 1)->t - e.t) < gap) best = &*(it - 1);
    }
    if (!best) {
      ++a.unmatched;
      continue;
    }
    a.est.emplace_back(e.position.x(), e.position.y());
    a.gt.emplace_back(best->position.x(), best->position.y());
  }
  return a;
}

namespace detail {

inline double mean_planar_error(const std::vector<Eigen::Vector2d>& est, const std::vector<Eigen::Vector2d>& gt) {
  if (est.empty()) throw std::invalid_argument("no associated samples between estimate and ground truth");
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += (est[i] - gt[i]).norm();
  return sum / static_cast<double>(est.size());
}

}  // namespace detail

/// Mean planar translation error.
inline double m_ate(std::span<const TrajectoryPoint> est, std::span<const TrajectoryPoint> gt) {
  const auto a = associate(est, gt);
  return detail::mean_planar_error(a.est, a.gt);
}

/// Planar rigid transform (yaw + translation) mapping estimate points onto ground truth.
struct PlanarAlignment {
  double yaw = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& x) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * x.x() - s * x.y() + translation.x(), s * x.x() + c * x.y() + translation.y()};
  }
};

namespace detail {

struct CentredSums {
  Eigen::Vector2d me = Eigen::Vector2d::Zero(), mg = Eigen::Vector2d::Zero();
  double sdot = 0.0, scross = 0.0, spread = 0.0;
};

inline CentredSums centred_sums(const std::vector<Eigen::Vector2d>& est, const std::vector<Eigen::Vector2d>& gt) {
  if (est.size() != gt.size() || est.empty()) throw std::invalid_argument("align_planar: bad point sets");
  CentredSums c;
  for (std::size_t i = 0; i < est.size(); ++i) {
    c.me += est[i];
    c.mg += gt[i];
  }
  c.me /= static_cast<double>(est.size());
  c.mg /= static_cast<double>(gt.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Eigen::Vector2d a = est[i] - c.me, b = gt[i] - c.mg;
    c.sdot += a.dot(b);
    c.scross += a.x() * b.y() - a.y() * b.x();
    c.spread += a.squaredNorm() + b.squaredNorm();
  }
  return c;
}

inline constexpr double kMinSpread = 1e-18;  // m², below this every yaw fits equally well

}  // namespace detail

/// Closed-form least-squares SE(2) alignment (no scale).
inline PlanarAlignment align_planar(const std::vector<Eigen::Vector2d>& est, const std::vector<Eigen::Vector2d>& gt) {
  const auto c = detail::centred_sums(est, gt);
  if (!(c.spread > detail::kMinSpread))
    throw std::invalid_argument("align_planar: degenerate geometry (coincident points)");
  PlanarAlignment al;
  al.yaw = std::atan2(c.scross, c.sdot);
  al.translation = c.mg - al.apply(c.me);
  return al;
}

/// Mean planar error after optimal planar rigid alignment.
inline double aligned_m_ate(std::span<const TrajectoryPoint> est, std::span<const TrajectoryPoint> gt) {
  auto a = associate(est, gt);
  if (a.est.size() < 2) throw std::invalid_argument("aligned_m_ate: need at least two associated samples");
  const auto al = align_planar(a.est, a.gt);
  for (auto& p : a.est) p = al.apply(p);
  return detail::mean_planar_error(a.est, a.gt);
}

/// Planar distance between the last associated pair.
inline double final_distance(std::span<const TrajectoryPoint> est, std::span<const TrajectoryPoint> gt) {
  if (est.empty() || gt.empty()) throw std::invalid_argument("final_distance: empty trajectory");
  const auto a = associate(est, gt);
  if (a.est.empty()) throw std::invalid_argument("final_distance: no associated samples");
  return (a.est.back() - a.gt.back()).norm();
}

/// Horizontal path length of a trajectory.
inline double path_length(std::span<const TrajectoryPoint> tr) {
  double len = 0.0;
  for (std::size_t i = 1; i < tr.size(); ++i) len += (tr[i].position - tr[i - 1].position).head<2>().norm();
  return len;
}

struct MetricsReport {
  double m_ate = 0.0;
  double aligned_m_ate = 0.0;
  double final_distance = 0.0;
  double length = 0.0;
  double duration = 0.0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
  bool alignment_degenerate = false;  // coincident points: aligned_m_ate uses translation only

  std::string to_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "m_ate=" << m_ate << "\naligned_m_ate=" << aligned_m_ate << "\nfinal_distance=" << final_distance
       << "\nlength=" << length << "\nduration=" << duration << "\nmatched=" << matched
       << "\nunmatched=" << unmatched << "\nalignment_degenerate=" << alignment_degenerate << "\n";
    return os.str();
  }
};

inline MetricsReport evaluate_trajectory(std::span<const TrajectoryPoint> est, std::span<const TrajectoryPoint> gt) {
  MetricsReport r;
  const auto a = associate(est, gt);
  r.matched = a.est.size();
  r.unmatched = a.unmatched;
  r.m_ate = m_ate(est, gt);
  if (a.est.size() >= 2 && detail::centred_sums(a.est, a.gt).spread > detail::kMinSpread) {
    r.aligned_m_ate = aligned_m_ate(est, gt);
  } else {
    // Every yaw is optimal; matching centroids is all an alignment can do.
    const auto c = detail::centred_sums(a.est, a.gt);
    auto shifted = a.est;
    for (auto& p : shifted) p += c.mg - c.me;
    r.aligned_m_ate = detail::mean_planar_error(shifted, a.gt);
    r.alignment_degenerate = true;
  }
  r.final_distance = final_distance(est, gt);
  r.length = path_length(gt);
  r.duration = gt.empty() ? 0.0 : gt.back().t - gt.front().t;
  return r;
}

}  // namespace wheelnav
