#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "depthpack/error.hpp"

namespace depthpack {

enum class ChromaMode { Full444, Sub420 };

std::string to_string(ChromaMode mode);
ChromaMode parse_chroma_mode(const std::string& text);

// Normalized nonlinear depth, one value in [0,1] per pixel, row-major.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, std::vector<float> values,
           std::int64_t frame_index = 0,
           std::optional<double> timestamp = std::nullopt);

  static DepthMap filled(int width, int height, float value,
                         std::int64_t frame_index = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  float at(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::int64_t frame_index() const { return frame_index_; }
  std::optional<double> timestamp() const { return timestamp_; }

  DepthMap with_index(std::int64_t frame_index,
                      std::optional<double> timestamp = std::nullopt) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
  std::int64_t frame_index_ = 0;
  std::optional<double> timestamp_;
};

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  Quaternion normalized() const;
};

// Camera pose sample. The orientation must be a unit quaternion.
class CameraState {
 public:
  CameraState() = default;
  CameraState(std::array<double, 3> position, Quaternion orientation,
              double timestamp);

  const std::array<double, 3>& position() const { return position_; }
  const Quaternion& orientation() const { return orientation_; }
  double timestamp() const { return timestamp_; }

 private:
  std::array<double, 3> position_{0.0, 0.0, 0.0};
  Quaternion orientation_{};
  double timestamp_ = 0.0;
};

// Camera clip planes, 0 < near < far.
class NearFar {
 public:
  NearFar() = default;
  NearFar(double near_plane, double far_plane);

  double near_plane() const { return near_; }
  double far_plane() const { return far_; }

 private:
  double near_ = 0.1;
  double far_ = 100.0;
};

// View-space distance of a reversed-Z depth value: d = 1 at the near plane,
// d = 0 at the far plane.
double linearize(double depth, const NearFar& nf);

// Inverse of linearize, clamped to [0,1] outside the frustum.
double depth_from_distance(double distance, const NearFar& nf);

// Round-half-up mapping of a real in [0,1] to an 8-bit sample.
inline std::uint8_t quantize8(double value) {
  double scaled = value * 255.0 + 0.5;
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

// Three 8-bit planes. Chroma is full rate (Full444) or one sample per 2x2
// block (Sub420), which requires even dimensions.
class PackedFrame {
 public:
  PackedFrame() = default;
  PackedFrame(int width, int height, ChromaMode mode, std::vector<std::uint8_t> y,
              std::vector<std::uint8_t> u, std::vector<std::uint8_t> v);

  static PackedFrame filled(int width, int height, ChromaMode mode,
                            std::uint8_t y, std::uint8_t u, std::uint8_t v);

  int width() const { return width_; }
  int height() const { return height_; }
  ChromaMode chroma_mode() const { return mode_; }
  int chroma_width() const { return mode_ == ChromaMode::Sub420 ? width_ / 2 : width_; }
  int chroma_height() const { return mode_ == ChromaMode::Sub420 ? height_ / 2 : height_; }

  std::span<const std::uint8_t> y() const { return planes_[0]; }
  std::span<const std::uint8_t> u() const { return planes_[1]; }
  std::span<const std::uint8_t> v() const { return planes_[2]; }
  std::span<const std::uint8_t> plane(int index) const { return planes_.at(index); }
  int plane_width(int index) const { return index == 0 ? width_ : chroma_width(); }
  int plane_height(int index) const { return index == 0 ? height_ : chroma_height(); }

  bool operator==(const PackedFrame&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  ChromaMode mode_ = ChromaMode::Full444;
  std::array<std::vector<std::uint8_t>, 3> planes_;
};

// 2x2 mean (round half up) of each chroma block; luma untouched.
PackedFrame subsample_chroma(const PackedFrame& frame);

// Nearest-neighbour replication of each chroma sample to its 2x2 block.
PackedFrame upsample_chroma(const PackedFrame& frame);

struct VbpScheme {
  int bits = 16;
  bool operator==(const VbpScheme&) const = default;
};

struct RpScheme {
  int period = 2048;
  bool operator==(const RpScheme&) const = default;
};

class PackingConfig {
 public:
  static constexpr int kMinBits = 8;
  static constexpr int kMaxBits = 24;
  static constexpr int kMaxPeriod = 1 << 15;

  PackingConfig() = default;  // VBP at 16 bits

  // Throws ConfigError unless bits is in 8..24.
  static PackingConfig vbp(int bits);
  // Throws ConfigError unless period is a power of two in 1..2^15.
  static PackingConfig rp(int period);
  // "VBP" or "RP" plus the parameter, e.g. parse("RP", 512).
  static PackingConfig parse(const std::string& scheme, int parameter);

  bool is_vbp() const { return std::holds_alternative<VbpScheme>(scheme_); }
  bool is_rp() const { return std::holds_alternative<RpScheme>(scheme_); }
  int bits() const;
  int period() const;
  // Bits for VBP, n_p for RP.
  int parameter() const { return is_vbp() ? bits() : period(); }
  std::string scheme_name() const { return is_vbp() ? "VBP" : "RP"; }
  std::string label() const;

  bool operator==(const PackingConfig&) const = default;

 private:
  explicit PackingConfig(std::variant<VbpScheme, RpScheme> scheme)
      : scheme_(scheme) {}
  std::variant<VbpScheme, RpScheme> scheme_;
};

}  // namespace depthpack
