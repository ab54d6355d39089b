#include "depthpack/types.hpp"

#include <cmath>
#include <sstream>

namespace depthpack {

std::string to_string(ChromaMode mode) {
  return mode == ChromaMode::Full444 ? "444" : "420";
}

ChromaMode parse_chroma_mode(const std::string& text) {
  if (text == "444" || text == "yuv444" || text == "YUV444") return ChromaMode::Full444;
  if (text == "420" || text == "yuv420" || text == "YUV420") return ChromaMode::Sub420;
  throw ConfigError("unknown chroma mode '" + text + "' (expected 444 or 420)");
}

DepthMap::DepthMap(int width, int height, std::vector<float> values,
                   std::int64_t frame_index, std::optional<double> timestamp)
    : width_(width),
      height_(height),
      values_(std::move(values)),
      frame_index_(frame_index),
      timestamp_(timestamp) {
  if (width <= 0 || height <= 0) {
    throw DimensionError("depth map dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    std::ostringstream msg;
    msg << "depth map of " << width << "x" << height << " needs "
        << static_cast<std::size_t>(width) * height << " values, got "
        << values_.size();
    throw DimensionError(msg.str());
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError("depth value outside [0,1]: " + std::to_string(v));
    }
  }
}

DepthMap DepthMap::filled(int width, int height, float value,
                          std::int64_t frame_index) {
  if (width <= 0 || height <= 0) {
    throw DimensionError("depth map dimensions must be positive");
  }
  return DepthMap(width, height,
                  std::vector<float>(static_cast<std::size_t>(width) * height, value),
                  frame_index);
}

DepthMap DepthMap::with_index(std::int64_t frame_index,
                              std::optional<double> timestamp) const {
  DepthMap copy = *this;
  copy.frame_index_ = frame_index;
  copy.timestamp_ = timestamp;
  return copy;
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DataError("cannot normalize a zero or non-finite quaternion");
  }
  return {w / n, x / n, y / n, z / n};
}

CameraState::CameraState(std::array<double, 3> position, Quaternion orientation,
                         double timestamp)
    : position_(position), orientation_(orientation), timestamp_(timestamp) {
  if (std::abs(orientation.norm() - 1.0) > 1e-6) {
    throw DataError("camera orientation is not a unit quaternion");
  }
}

NearFar::NearFar(double near_plane, double far_plane)
    : near_(near_plane), far_(far_plane) {
  if (!(near_plane > 0.0) || !(far_plane > near_plane)) {
    throw ConfigError("near/far planes must satisfy 0 < near < far");
  }
}

double linearize(double depth, const NearFar& nf) {
  double n = nf.near_plane();
  double f = nf.far_plane();
  return n * f / (n + depth * (f - n));
}

double depth_from_distance(double distance, const NearFar& nf) {
  double n = nf.near_plane();
  double f = nf.far_plane();
  if (distance <= n) return 1.0;
  if (distance >= f) return 0.0;
  return n * (f - distance) / (distance * (f - n));
}

PackedFrame::PackedFrame(int width, int height, ChromaMode mode,
                         std::vector<std::uint8_t> y, std::vector<std::uint8_t> u,
                         std::vector<std::uint8_t> v)
    : width_(width), height_(height), mode_(mode) {
  if (width <= 0 || height <= 0) {
    throw DimensionError("frame dimensions must be positive");
  }
  if (mode == ChromaMode::Sub420 && (width % 2 != 0 || height % 2 != 0)) {
    throw DimensionError("4:2:0 chroma requires even frame dimensions");
  }
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma = static_cast<std::size_t>(chroma_width()) * chroma_height();
  if (y.size() != luma || u.size() != chroma || v.size() != chroma) {
    throw DimensionError("plane lengths do not match frame dimensions");
  }
  planes_ = {std::move(y), std::move(u), std::move(v)};
}

PackedFrame PackedFrame::filled(int width, int height, ChromaMode mode,
                                std::uint8_t y, std::uint8_t u, std::uint8_t v) {
  std::size_t luma = static_cast<std::size_t>(width) * height;
  std::size_t chroma = mode == ChromaMode::Sub420 ? luma / 4 : luma;
  return PackedFrame(width, height, mode, std::vector<std::uint8_t>(luma, y),
                     std::vector<std::uint8_t>(chroma, u),
                     std::vector<std::uint8_t>(chroma, v));
}

namespace {

std::vector<std::uint8_t> mean2x2(std::span<const std::uint8_t> plane, int width,
                                  int height) {
  const int cw = width / 2;
  const int ch = height / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(cw) * ch);
  for (int y = 0; y < ch; ++y) {
    const std::uint8_t* r0 = plane.data() + static_cast<std::size_t>(2 * y) * width;
    const std::uint8_t* r1 = r0 + width;
    for (int x = 0; x < cw; ++x) {
      int sum = r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
      out[static_cast<std::size_t>(y) * cw + x] = static_cast<std::uint8_t>((sum + 2) / 4);
    }
  }
  return out;
}

std::vector<std::uint8_t> replicate2x2(std::span<const std::uint8_t> plane, int cw,
                                       int ch) {
  const int width = cw * 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * ch * 2);
  for (int y = 0; y < ch * 2; ++y) {
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] =
          plane[static_cast<std::size_t>(y / 2) * cw + x / 2];
    }
  }
  return out;
}

}  // namespace

PackedFrame subsample_chroma(const PackedFrame& frame) {
  if (frame.chroma_mode() != ChromaMode::Full444) {
    throw DimensionError("subsample_chroma expects a 4:4:4 frame");
  }
  if (frame.width() % 2 != 0 || frame.height() % 2 != 0) {
    throw DimensionError("4:2:0 chroma requires even frame dimensions");
  }
  auto y = std::vector<std::uint8_t>(frame.y().begin(), frame.y().end());
  return PackedFrame(frame.width(), frame.height(), ChromaMode::Sub420, std::move(y),
                     mean2x2(frame.u(), frame.width(), frame.height()),
                     mean2x2(frame.v(), frame.width(), frame.height()));
}

PackedFrame upsample_chroma(const PackedFrame& frame) {
  if (frame.chroma_mode() == ChromaMode::Full444) return frame;
  auto y = std::vector<std::uint8_t>(frame.y().begin(), frame.y().end());
  return PackedFrame(frame.width(), frame.height(), ChromaMode::Full444, std::move(y),
                     replicate2x2(frame.u(), frame.chroma_width(), frame.chroma_height()),
                     replicate2x2(frame.v(), frame.chroma_width(), frame.chroma_height()));
}

PackingConfig PackingConfig::vbp(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw ConfigError("VBP precision must be in 8..24 bits, got " + std::to_string(bits));
  }
  return PackingConfig(VbpScheme{bits});
}

PackingConfig PackingConfig::rp(int period) {
  if (period < 1 || period > kMaxPeriod || (period & (period - 1)) != 0) {
    throw ConfigError("RP period must be a power of two in 1..32768, got " +
                      std::to_string(period));
  }
  return PackingConfig(RpScheme{period});
}

PackingConfig PackingConfig::parse(const std::string& scheme, int parameter) {
  if (scheme == "VBP" || scheme == "vbp") return vbp(parameter);
  if (scheme == "RP" || scheme == "rp") return rp(parameter);
  throw ConfigError("unknown packing scheme '" + scheme + "'");
}

int PackingConfig::bits() const {
  if (!is_vbp()) throw ConfigError("RP configuration has no bit precision");
  return std::get<VbpScheme>(scheme_).bits;
}

int PackingConfig::period() const {
  if (!is_rp()) throw ConfigError("VBP configuration has no period");
  return std::get<RpScheme>(scheme_).period;
}

std::string PackingConfig::label() const {
  return scheme_name() + std::to_string(parameter());
}

}  // namespace depthpack
