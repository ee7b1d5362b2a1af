#pragma once

// CSV logs: IMU samples, ground truth, per-sample flags and filter estimates.
// Each file starts with a "# wheelnav-<kind> v1" schema line followed by a header row.
// Numbers are written in shortest round-trip form.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wheelnav/flags.hpp"
#include "wheelnav/lie.hpp"
#include "wheelnav/metrics.hpp"
#include "wheelnav/simulator.hpp"
#include "wheelnav/state.hpp"

namespace wheelnav {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace csv {

inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Header-addressed table; `line` numbers are 1-based file lines for error messages.
struct Table {
  std::map<std::string, std::size_t, std::less<>> columns;
  struct Row {
    std::size_t line;
    std::vector<std::string> cells;
  };
  std::vector<Row> rows;
  std::filesystem::path source;

  bool has(std::string_view name) const { return columns.find(name) != columns.end(); }

  std::size_t column(std::string_view name) const {
    const auto it = columns.find(name);
    if (it == columns.end()) throw CsvError(source.string() + ": missing column '" + std::string(name) + "'");
    return it->second;
  }

  double number(const Row& r, std::size_t col) const {
    const std::string& cell = r.cells[col];
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
      throw CsvError(source.string() + ": row " + std::to_string(r.line) + ": cannot parse '" + cell + "'");
    return v;
  }

  Vec3 vec3(const Row& r, std::size_t c0, std::size_t c1, std::size_t c2) const {
    return {number(r, c0), number(r, c1), number(r, c2)};
  }
};

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  Table t;
  t.source = path;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cells = split(view);
    if (!header) {
      for (std::size_t i = 0; i < cells.size(); ++i) t.columns.emplace(std::string(cells[i]), i);
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw CsvError(path.string() + ": row " + std::to_string(lineno) + ": expected " +
                     std::to_string(t.columns.size()) + " fields, got " + std::to_string(cells.size()));
    Table::Row r{lineno, {}};
    for (auto c : cells) r.cells.emplace_back(c);
    t.rows.push_back(std::move(r));
  }
  if (!header) throw CsvError(path.string() + ": no header row");
  return t;
}

inline std::ofstream open_out(const std::filesystem::path& path, std::string_view kind) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path.string());
  out << "# wheelnav-" << kind << " v1\n";
  return out;
}

inline void check_increasing(const Table& t, const Table::Row& r, double prev, double cur) {
  if (!(cur > prev))
    throw CsvError(t.source.string() + ": row " + std::to_string(r.line) + ": timestamp " + fmt(cur) +
                   " does not increase (previous " + fmt(prev) + ")");
}

}  // namespace csv

inline std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
  const auto t = csv::read_table(path);
  const std::size_t ct = t.column("t");
  const std::size_t w0 = t.column("wx"), w1 = t.column("wy"), w2 = t.column("wz");
  const std::size_t a0 = t.column("ax"), a1 = t.column("ay"), a2 = t.column("az");
  std::vector<ImuSample> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    ImuSample s{t.number(r, ct), t.vec3(r, w0, w1, w2), t.vec3(r, a0, a1, a2)};
    if (!out.empty()) csv::check_increasing(t, r, out.back().t, s.t);
    out.push_back(s);
  }
  return out;
}

inline void write_imu_csv(const std::filesystem::path& path, std::span<const ImuSample> samples) {
  auto out = csv::open_out(path, "imu");
  out << "t,wx,wy,wz,ax,ay,az\n";
  for (const auto& s : samples) {
    out << csv::fmt(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.gyro(i));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.accel(i));
    out << '\n';
  }
}

/// Ground-truth row: pose always, kinematics and labels when the file carries them.
struct GroundTruthRow {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  std::optional<Vec3> velocity;
  std::optional<Vec3> omega;
  std::optional<MotionFlags> flags;
};

struct GroundTruthLog {
  std::vector<GroundTruthRow> rows;
  std::vector<std::string> warnings;

  TrajectoryRecord trajectory() const {
    TrajectoryRecord tr;
    tr.reserve(rows.size());
    for (const auto& r : rows) tr.push_back({r.t, r.position, r.rotation});
    return tr;
  }
};

/// Rotations deviating from orthogonality by more than this are reported when re-projected.
inline constexpr double kRotationWarnThreshold = 1e-6;

inline GroundTruthLog read_ground_truth_csv(const std::filesystem::path& path) {
  const auto t = csv::read_table(path);
  const std::size_t ct = t.column("t");
  const std::size_t p0 = t.column("px"), p1 = t.column("py"), p2 = t.column("pz");
  std::size_t rc[9];
  for (int i = 0; i < 9; ++i) rc[i] = t.column("r" + std::to_string(i / 3) + std::to_string(i % 3));
  const bool has_vel = t.has("vx"), has_omega = t.has("wx"), has_flags = t.has("z_vel");

  GroundTruthLog log;
  log.rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    GroundTruthRow g;
    g.t = t.number(r, ct);
    if (!log.rows.empty()) csv::check_increasing(t, r, log.rows.back().t, g.t);
    g.position = t.vec3(r, p0, p1, p2);
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = t.number(r, rc[i]);
    const double dev = orthogonality_error(m);
    if (dev > kRotationWarnThreshold || m.determinant() < 0.0)
      log.warnings.push_back(path.string() + ": row " + std::to_string(r.line) +
                             ": rotation off SO(3) by " + csv::fmt(dev) + ", re-projected");
    g.rotation = project_to_rotation(m);
    if (has_vel) g.velocity = t.vec3(r, t.column("vx"), t.column("vy"), t.column("vz"));
    if (has_omega) g.omega = t.vec3(r, t.column("wx"), t.column("wy"), t.column("wz"));
    if (has_flags) {
      std::array<bool, 4> z{};
      for (int k = 0; k < 4; ++k) z[k] = t.number(r, t.column(std::string("z_") + kProfileNames[k])) != 0.0;
      g.flags = MotionFlags::from_array(z);
    }
    log.rows.push_back(std::move(g));
  }
  return log;
}

inline void write_ground_truth_csv(const std::filesystem::path& path, std::span<const GroundTruthSample> truth) {
  auto out = csv::open_out(path, "truth");
  out << "t,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22,vx,vy,vz,wx,wy,wz,ax,ay,az,z_vel,z_ang,z_lat,z_up\n";
  for (const auto& s : truth) {
    out << csv::fmt(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.position(i));
    for (int i = 0; i < 9; ++i) out << ',' << csv::fmt(s.rotation(i / 3, i % 3));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.velocity(i));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.omega(i));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(s.accel(i));
    for (bool b : s.flags.as_array()) out << ',' << (b ? 1 : 0);
    out << '\n';
  }
}

struct FlagRow {
  double t = 0.0;
  MotionFlags flags;
};

inline std::vector<FlagRow> read_flags_csv(const std::filesystem::path& path) {
  const auto t = csv::read_table(path);
  const std::size_t ct = t.column("t");
  std::size_t cz[4];
  for (int k = 0; k < 4; ++k) cz[k] = t.column(std::string("z_") + kProfileNames[k]);
  std::vector<FlagRow> out;
  for (const auto& r : t.rows) {
    FlagRow f{t.number(r, ct), {}};
    if (!out.empty()) csv::check_increasing(t, r, out.back().t, f.t);
    std::array<bool, 4> z{};
    for (int k = 0; k < 4; ++k) z[k] = t.number(r, cz[k]) != 0.0;
    f.flags = MotionFlags::from_array(z);
    out.push_back(f);
  }
  return out;
}

inline void write_flags_csv(const std::filesystem::path& path, std::span<const FlagRow> rows) {
  auto out = csv::open_out(path, "flags");
  out << "t,z_vel,z_ang,z_lat,z_up\n";
  for (const auto& r : rows) {
    out << csv::fmt(r.t);
    for (bool b : r.flags.as_array()) out << ',' << (b ? 1 : 0);
    out << '\n';
  }
}

/// One filter output row.
struct EstimateRow {
  double t = 0.0;
  NavState nav;
  double cov_trace = 0.0;
  MotionFlags flags;
};

inline void write_estimate_csv(const std::filesystem::path& path, std::span<const EstimateRow> rows) {
  auto out = csv::open_out(path, "estimate");
  out << "t,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz,cov_trace,"
         "z_vel,z_ang,z_lat,z_up\n";
  for (const auto& r : rows) {
    out << csv::fmt(r.t);
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(r.nav.position(i));
    for (int i = 0; i < 9; ++i) out << ',' << csv::fmt(r.nav.rotation(i / 3, i % 3));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(r.nav.velocity(i));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(r.nav.gyro_bias(i));
    for (int i = 0; i < 3; ++i) out << ',' << csv::fmt(r.nav.accel_bias(i));
    out << ',' << csv::fmt(r.cov_trace);
    for (bool b : r.flags.as_array()) out << ',' << (b ? 1 : 0);
    out << '\n';
  }
}

/// Estimates share the ground-truth pose columns, so the same reader applies.
inline TrajectoryRecord read_trajectory_csv(const std::filesystem::path& path) {
  return read_ground_truth_csv(path).trajectory();
}

}  // namespace wheelnav
