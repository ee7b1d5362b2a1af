#pragma once

// Recurrent motion-profile detector: inference over weights trained elsewhere.
// Binary layout of the weight file is documented in docs/detector_weights.md.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wheelnav/detectors.hpp"
#include "wheelnav/flags.hpp"
#include "wheelnav/state.hpp"

namespace wheelnav {

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

inline constexpr char kWeightsMagic[8] = {'R', 'I', 'N', 'S', 'W', 'D', 'E', 'T'};
inline constexpr std::uint32_t kWeightsVersion = 1;
inline constexpr std::uint32_t kNetworkInputSize = 6;  // gyro xyz, accel xyz

class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation : std::uint32_t { kIdentity = 0, kRelu = 1 };

/// One LSTM layer; gates stacked as (input, forget, cell, output) blocks of `hidden` rows.
struct LstmLayer {
  Eigen::MatrixXd w_ih;  // 4H × in
  Eigen::MatrixXd w_hh;  // 4H × H
  Eigen::VectorXd b_ih;  // 4H
  Eigen::VectorXd b_hh;  // 4H
};

struct DenseLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
  Activation act = Activation::kIdentity;
};

/// Network for a single profile: normalization, stacked LSTM, two-layer head, sigmoid.
struct ProfileNetwork {
  Eigen::Matrix<double, 6, 1> input_mean = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> input_scale = Eigen::Matrix<double, 6, 1>::Ones();
  std::vector<LstmLayer> layers;
  DenseLayer head_hidden;
  DenseLayer head_out;  // one output row
  double threshold = 0.5;
};

struct DetectorWeights {
  std::uint32_t hidden_size = 0;
  std::array<ProfileNetwork, 4> profiles;

  std::array<double, 4> thresholds() const {
    return {profiles[0].threshold, profiles[1].threshold, profiles[2].threshold, profiles[3].threshold};
  }

  /// Throws WeightFormatError on any inconsistent shape or out-of-range threshold.
  void validate() const {
    const Eigen::Index h = hidden_size;
    if (h == 0) throw WeightFormatError("hidden size must be positive");
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      const auto& p = profiles[k];
      const std::string where = std::string("profile ") + kProfileNames[k] + ": ";
      if (p.layers.empty()) throw WeightFormatError(where + "no recurrent layers");
      Eigen::Index in = kNetworkInputSize;
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        const std::string lw = where + "layer " + std::to_string(l) + ": ";
        if (L.w_ih.rows() != 4 * h || L.w_ih.cols() != in) throw WeightFormatError(lw + "w_ih shape");
        if (L.w_hh.rows() != 4 * h || L.w_hh.cols() != h) throw WeightFormatError(lw + "w_hh shape");
        if (L.b_ih.size() != 4 * h || L.b_hh.size() != 4 * h) throw WeightFormatError(lw + "bias shape");
        in = h;
      }
      if (p.head_hidden.w.cols() != h || p.head_hidden.b.size() != p.head_hidden.w.rows() ||
          p.head_hidden.w.rows() == 0)
        throw WeightFormatError(where + "head hidden layer shape");
      if (p.head_out.w.rows() != 1 || p.head_out.w.cols() != p.head_hidden.w.rows() ||
          p.head_out.b.size() != 1)
        throw WeightFormatError(where + "head output layer shape");
      if (!(p.threshold > 0.0 && p.threshold < 1.0))
        throw WeightFormatError(where + "threshold must lie in (0, 1)");
      if ((p.input_scale.array() == 0.0).any()) throw WeightFormatError(where + "zero input scale");
    }
  }

  /// Every tensor zero, unit scale; useful as a shape template.
  static DetectorWeights zeros(std::uint32_t hidden, std::uint32_t head_hidden, std::size_t layers = 2,
                               std::array<double, 4> thresholds = {0.95, 0.95, 0.5, 0.5}) {
    DetectorWeights w;
    w.hidden_size = hidden;
    const Eigen::Index h = hidden;
    for (std::size_t k = 0; k < 4; ++k) {
      auto& p = w.profiles[k];
      Eigen::Index in = kNetworkInputSize;
      for (std::size_t l = 0; l < layers; ++l) {
        p.layers.push_back({Eigen::MatrixXd::Zero(4 * h, in), Eigen::MatrixXd::Zero(4 * h, h),
                            Eigen::VectorXd::Zero(4 * h), Eigen::VectorXd::Zero(4 * h)});
        in = h;
      }
      p.head_hidden = {Eigen::MatrixXd::Zero(head_hidden, h), Eigen::VectorXd::Zero(head_hidden),
                       Activation::kRelu};
      p.head_out = {Eigen::MatrixXd::Zero(1, head_hidden), Eigen::VectorXd::Zero(1), Activation::kIdentity};
      p.threshold = thresholds[k];
    }
    return w;
  }
};

/// Per-profile, per-layer (h, c) vectors.
struct DetectorHiddenState {
  struct Cell {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
  };
  std::array<std::vector<Cell>, 4> profiles;

  static DetectorHiddenState zeros(const DetectorWeights& w) {
    DetectorHiddenState s;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t l = 0; l < w.profiles[k].layers.size(); ++l)
        s.profiles[k].push_back({Eigen::VectorXd::Zero(w.hidden_size), Eigen::VectorXd::Zero(w.hidden_size)});
    return s;
  }
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Eigen::VectorXd apply(Activation a, Eigen::VectorXd x) {
  if (a == Activation::kRelu) x = x.cwiseMax(0.0);
  return x;
}

}  // namespace detail

/// One recurrent step of all four networks on the (gyro, accel) input.
inline std::pair<ProfileScores, DetectorHiddenState> detect_step(const DetectorWeights& w,
                                                                 const DetectorHiddenState& hidden,
                                                                 const ImuSample& s) {
  const Eigen::Index h = w.hidden_size;
  Eigen::Matrix<double, 6, 1> raw;
  raw << s.gyro, s.accel;

  ProfileScores scores{};
  DetectorHiddenState next = hidden;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& net = w.profiles[k];
    if (hidden.profiles[k].size() != net.layers.size())
      throw std::invalid_argument("detect_step: hidden state does not match weights");
    Eigen::VectorXd x = (raw - net.input_mean).cwiseProduct(net.input_scale);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& L = net.layers[l];
      const auto& prev = hidden.profiles[k][l];
      if (prev.h.size() != h || prev.c.size() != h)
        throw std::invalid_argument("detect_step: hidden vector size mismatch");
      const Eigen::VectorXd gates = L.w_ih * x + L.b_ih + L.w_hh * prev.h + L.b_hh;
      const Eigen::ArrayXd i = gates.segment(0, h).unaryExpr(&detail::sigmoid).array();
      const Eigen::ArrayXd f = gates.segment(h, h).unaryExpr(&detail::sigmoid).array();
      const Eigen::ArrayXd g = gates.segment(2 * h, h).array().tanh();
      const Eigen::ArrayXd o = gates.segment(3 * h, h).unaryExpr(&detail::sigmoid).array();
      auto& cell = next.profiles[k][l];
      cell.c = (f * prev.c.array() + i * g).matrix();
      cell.h = (o * cell.c.array().tanh()).matrix();
      x = cell.h;
    }
    const Eigen::VectorXd z1 = detail::apply(net.head_hidden.act, net.head_hidden.w * x + net.head_hidden.b);
    const Eigen::VectorXd z2 = detail::apply(net.head_out.act, net.head_out.w * z1 + net.head_out.b);
    scores[k] = detail::sigmoid(z2(0));
  }
  return {scores, std::move(next)};
}

/// Scores for a whole sequence from the zero hidden state.
inline std::vector<ProfileScores> detect_sequence(const DetectorWeights& w, std::span<const ImuSample> seq) {
  std::vector<ProfileScores> out;
  out.reserve(seq.size());
  auto hidden = DetectorHiddenState::zeros(w);
  for (const auto& s : seq) {
    auto [u, h] = detect_step(w, hidden, s);
    out.push_back(u);
    hidden = std::move(h);
  }
  return out;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T read() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        const float v = read<float>();
        if (!std::isfinite(v)) throw WeightFormatError("non-finite value in tensor");
        m(r, c) = v;
      }
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index n) { return matrix(n, 1); }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw WeightFormatError("weight file truncated at byte " + std::to_string(pos_));
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  template <typename T>
  void write(T v) {
    const char* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void tensor(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write(static_cast<float>(m(r, c)));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

inline Activation read_activation(Reader& r) {
  const auto tag = r.read<std::uint32_t>();
  if (tag > 1) throw WeightFormatError("unknown activation tag " + std::to_string(tag));
  return static_cast<Activation>(tag);
}

}  // namespace detail

inline DetectorWeights parse_weights(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  char magic[8];
  for (char& c : magic) c = r.read<char>();
  if (std::memcmp(magic, kWeightsMagic, 8) != 0) throw WeightFormatError("bad magic, expected RINSWDET");
  const auto version = r.read<std::uint32_t>();
  if (version != kWeightsVersion) throw WeightFormatError("unsupported version " + std::to_string(version));
  const auto count = r.read<std::uint32_t>();
  if (count != 4) throw WeightFormatError("expected 4 profiles, got " + std::to_string(count));
  DetectorWeights w;
  w.hidden_size = r.read<std::uint32_t>();
  const auto input = r.read<std::uint32_t>();
  if (input != kNetworkInputSize) throw WeightFormatError("expected input size 6, got " + std::to_string(input));
  if (w.hidden_size == 0 || w.hidden_size > 4096) throw WeightFormatError("implausible hidden size");
  const Eigen::Index h = w.hidden_size;

  for (auto& p : w.profiles) {
    const auto layers = r.read<std::uint32_t>();
    const auto head = r.read<std::uint32_t>();
    if (layers == 0 || layers > 16) throw WeightFormatError("implausible layer count");
    if (head == 0 || head > 4096) throw WeightFormatError("implausible head size");
    p.input_mean = r.vector(6);
    p.input_scale = r.vector(6);
    Eigen::Index in = input;
    for (std::uint32_t l = 0; l < layers; ++l) {
      LstmLayer L;
      L.w_ih = r.matrix(4 * h, in);
      L.w_hh = r.matrix(4 * h, h);
      L.b_ih = r.vector(4 * h);
      L.b_hh = r.vector(4 * h);
      p.layers.push_back(std::move(L));
      in = h;
    }
    p.head_hidden.act = detail::read_activation(r);
    p.head_hidden.w = r.matrix(head, h);
    p.head_hidden.b = r.vector(head);
    p.head_out.act = detail::read_activation(r);
    p.head_out.w = r.matrix(1, head);
    p.head_out.b = r.vector(1);
    p.threshold = r.read<float>();
  }
  if (!r.at_end()) throw WeightFormatError("trailing bytes after byte " + std::to_string(r.pos()));
  w.validate();
  return w;
}

inline std::vector<char> serialize_weights(const DetectorWeights& w) {
  w.validate();
  detail::Writer out;
  for (char c : kWeightsMagic) out.write(c);
  out.write(kWeightsVersion);
  out.write<std::uint32_t>(4);
  out.write<std::uint32_t>(w.hidden_size);
  out.write(kNetworkInputSize);
  for (const auto& p : w.profiles) {
    out.write(static_cast<std::uint32_t>(p.layers.size()));
    out.write(static_cast<std::uint32_t>(p.head_hidden.w.rows()));
    out.tensor(p.input_mean);
    out.tensor(p.input_scale);
    for (const auto& L : p.layers) {
      out.tensor(L.w_ih);
      out.tensor(L.w_hh);
      out.tensor(L.b_ih);
      out.tensor(L.b_hh);
    }
    out.write(static_cast<std::uint32_t>(p.head_hidden.act));
    out.tensor(p.head_hidden.w);
    out.tensor(p.head_hidden.b);
    out.write(static_cast<std::uint32_t>(p.head_out.act));
    out.tensor(p.head_out.w);
    out.tensor(p.head_out.b);
    out.write(static_cast<float>(p.threshold));
  }
  return out.bytes();
}

inline DetectorWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_weights(std::move(bytes));
}

inline void save_weights(const DetectorWeights& w, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Streaming wrapper: recurrent scores thresholded per profile.
class NetworkDetector final : public MotionDetector {
 public:
  explicit NetworkDetector(std::shared_ptr<const DetectorWeights> w)
      : weights_(std::move(w)), hidden_(DetectorHiddenState::zeros(*weights_)) {}

  MotionFlags step(const ImuSample& s) override {
    auto [u, h] = detect_step(*weights_, hidden_, s);
    hidden_ = std::move(h);
    last_scores_ = u;
    return threshold_scores(u, weights_->thresholds());
  }
  void reset() override { hidden_ = DetectorHiddenState::zeros(*weights_); }
  const ProfileScores& last_scores() const { return last_scores_; }

 private:
  std::shared_ptr<const DetectorWeights> weights_;
  DetectorHiddenState hidden_;
  ProfileScores last_scores_{};
};

}  // namespace wheelnav
