#include "depthpack/packing.hpp"

#include <algorithm>
#include <cmath>

namespace depthpack::packing {

namespace {

void check_bits(int bits) {
  if (bits < PackingConfig::kMinBits || bits > PackingConfig::kMaxBits) {
    throw ConfigError("VBP precision must be in 8..24 bits, got " + std::to_string(bits));
  }
}

int byte_of(double channel) { return static_cast<int>(std::floor(channel * 255.0 + 0.5)); }

// Scale applied to U (offset 8) or V (offset 16) for the requested
// precision; 0 means the channel is not used.
double precision_scale(int bits, int offset) {
  int used = std::min(8, bits - offset);
  if (used <= 0) return 0.0;
  return std::ldexp(1.0, used - 8);
}

double triangle(double phase, double period) {
  double h = phase / (period / 2.0);
  return h > 1.0 ? 2.0 - h : h;
}

double wrap_mod(double value, double period) {
  double r = std::fmod(value, period);
  return r < 0.0 ? r + period : r;
}

// Signed circular distance from b to a, in [-period/2, period/2).
double circular_delta(double a, double b, double period) {
  return wrap_mod(a - b + period / 2.0, period) - period / 2.0;
}

}  // namespace

ChannelTriple vbp_pack(double depth, int bits) {
  check_bits(bits);
  if (depth == 1.0) return {1.0, 1.0, 1.0};

  constexpr double kScale[4] = {1.0, 255.0, 65025.0, 16581375.0};
  constexpr double kDigit[3] = {65025.0 / 16581375.0, 255.0 / 16581375.0,
                                1.0 / 16581375.0};
  double unit[4] = {depth, depth, depth, depth};
  for (int i = 0; i < 3; ++i) {
    unit[i + 1] -= std::floor(unit[i + 1] / kDigit[i]) * kDigit[i];
  }
  double color[4];
  for (int i = 0; i < 4; ++i) {
    color[i] = unit[i] * kScale[i];
    color[i] -= std::floor(color[i]);
  }
  for (int i = 0; i < 3; ++i) color[i] -= color[i + 1] / 255.0;

  // Both parities come from the digits before any mirroring. The emitted U
  // byte is the U digit mirrored by the Y parity, so its parity is the sum.
  const int u_digit = byte_of(color[1]);
  const int y_digit = byte_of(color[0]);
  if ((u_digit + y_digit) % 2 == 1) color[2] = 1.0 - color[2];
  if (y_digit % 2 == 1) color[1] = 1.0 - color[1];

  color[1] *= precision_scale(bits, 8);
  color[2] *= precision_scale(bits, 16);
  return {color[0], color[1], color[2]};
}

double vbp_unpack(const ChannelTriple& c, int bits) {
  check_bits(bits);
  const int y_byte = byte_of(c.y);
  if (y_byte >= 255) return 1.0;

  double depth = c.y;
  const double u_scale = precision_scale(bits, 8);
  if (u_scale > 0.0) {
    double u = c.u / u_scale;
    const int u_byte = byte_of(u);
    if (y_byte % 2 == 1) u = 1.0 - u;
    depth += u / 255.0;

    const double v_scale = precision_scale(bits, 16);
    if (v_scale > 0.0) {
      double v = c.v / v_scale;
      if (u_byte % 2 == 1) v = 1.0 - v;
      depth += v / 65025.0;
    }
  }
  return std::clamp(depth, 0.0, 1.0);
}

ChannelTriple rp_pack(std::uint32_t depth16, int period) {
  (void)PackingConfig::rp(period);
  if (depth16 >= static_cast<std::uint32_t>(kRpDepthLevels)) {
    throw ConfigError("RP depth code out of range: " + std::to_string(depth16));
  }
  const double n = period;
  const double d = depth16;
  const double ha = triangle(wrap_mod(d, n), n);
  const double shifted = wrap_mod(d - n / 4.0, kRpDepthLevels);
  const double hb = triangle(wrap_mod(shifted, n), n);
  return {(d + 0.5) / kRpDepthLevels, ha, hb};
}

std::uint32_t rp_unpack(const ChannelTriple& c, int period) {
  const double n = period;
  const double half = n / 2.0;
  const double ha = std::clamp(c.u, 0.0, 1.0);
  const double hb = std::clamp(c.v, 0.0, 1.0);

  // Two phase candidates from U; V tells them apart.
  const double a1 = ha * half;
  const double a2 = wrap_mod(n - ha * half, n);
  const double e1 = std::abs(triangle(wrap_mod(a1 - n / 4.0, n), n) - hb);
  const double e2 = std::abs(triangle(wrap_mod(a2 - n / 4.0, n), n) - hb);
  double phase = e1 <= e2 ? a1 : a2;

  // Near a crest of U its slope information is unreliable; read V instead.
  if (ha < 0.25 || ha > 0.75) {
    const double b1 = wrap_mod(n / 4.0 + hb * half, n);
    const double b2 = wrap_mod(n / 4.0 - hb * half, n);
    phase = std::abs(circular_delta(b1, phase, n)) <= std::abs(circular_delta(b2, phase, n))
                ? b1
                : b2;
  }

  const double coarse = c.y * kRpDepthLevels - 0.5;
  const double depth = coarse + circular_delta(phase, coarse, n);
  const double rounded = std::floor(depth + 0.5);
  return static_cast<std::uint32_t>(std::clamp(rounded, 0.0, kRpDepthLevels - 1.0));
}

std::uint32_t to_depth16(double depth) {
  double code = std::floor(std::clamp(depth, 0.0, 1.0) * (kRpDepthLevels - 1) + 0.5);
  return static_cast<std::uint32_t>(code);
}

ChannelTriple pack_pixel(double depth, const PackingConfig& cfg) {
  if (cfg.is_vbp()) return vbp_pack(depth, cfg.bits());
  return rp_pack(to_depth16(depth), cfg.period());
}

double unpack_pixel(const ChannelTriple& c, const PackingConfig& cfg) {
  if (cfg.is_vbp()) return vbp_unpack(c, cfg.bits());
  return static_cast<double>(rp_unpack(c, cfg.period())) / (kRpDepthLevels - 1);
}

PackedFrame pack_frame(const DepthMap& map, const PackingConfig& cfg,
                       ChromaMode chroma) {
  if (chroma == ChromaMode::Sub420 && (map.width() % 2 != 0 || map.height() % 2 != 0)) {
    throw DimensionError("4:2:0 chroma requires even frame dimensions");
  }
  const std::size_t n = map.size();
  std::vector<std::uint8_t> y(n), u(n), v(n);
  const auto values = map.values();
  for (std::size_t i = 0; i < n; ++i) {
    ChannelTriple c = pack_pixel(values[i], cfg);
    y[i] = quantize8(c.y);
    u[i] = quantize8(c.u);
    v[i] = quantize8(c.v);
  }
  PackedFrame full(map.width(), map.height(), ChromaMode::Full444, std::move(y),
                   std::move(u), std::move(v));
  return chroma == ChromaMode::Sub420 ? subsample_chroma(full) : full;
}

DepthMap unpack_frame(const PackedFrame& frame, const PackingConfig& cfg,
                      std::int64_t frame_index) {
  const PackedFrame full = upsample_chroma(frame);
  const std::size_t n = static_cast<std::size_t>(full.width()) * full.height();
  std::vector<float> values(n);
  const auto y = full.y();
  const auto u = full.u();
  const auto v = full.v();
  for (std::size_t i = 0; i < n; ++i) {
    ChannelTriple c{y[i] / 255.0, u[i] / 255.0, v[i] / 255.0};
    values[i] = static_cast<float>(std::clamp(unpack_pixel(c, cfg), 0.0, 1.0));
  }
  return DepthMap(full.width(), full.height(), std::move(values), frame_index);
}

}  // namespace depthpack::packing
