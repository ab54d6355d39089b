#pragma once

#include <cstdint>

#include "depthpack/types.hpp"

namespace depthpack::packing {

// Pre-quantization channel values of one packed pixel, each in [0,1].
struct ChannelTriple {
  double y = 0.0;
  double u = 0.0;
  double v = 0.0;
};

// Variable bit packing of a normalized depth at 8..24 bits. Y carries the
// most significant base-255 digit, U and V the next two. U is mirrored when
// the Y byte is odd and V when the emitted U byte is odd, so both chroma
// channels form triangle waves in depth. Below 16 (24) bits the U (V)
// channel is scaled down into the low range of the channel, and dropped
// entirely at 8 (<= 16) bits. Depth 1.0 maps to (1,1,1).
ChannelTriple vbp_pack(double depth, int bits);

// Inverse of vbp_pack. A Y sample of 255 decodes as depth 1.0.
double vbp_unpack(const ChannelTriple& c, int bits);

inline constexpr int kRpDepthLevels = 1 << 16;

// Robust packing of a 16-bit depth code: coarse depth in Y, two triangle
// waves of the given period (quarter-period phase offset) in U and V.
ChannelTriple rp_pack(std::uint32_t depth16, int period);

// Recovers the phase within the period from U/V (using whichever wave is in
// its linear region) and picks the period copy nearest to the coarse Y depth.
std::uint32_t rp_unpack(const ChannelTriple& c, int period);

ChannelTriple pack_pixel(double depth, const PackingConfig& cfg);
double unpack_pixel(const ChannelTriple& c, const PackingConfig& cfg);

// RP quantizes the normalized input to a 16-bit code round(d * 65535).
std::uint32_t to_depth16(double depth);

PackedFrame pack_frame(const DepthMap& map, const PackingConfig& cfg,
                       ChromaMode chroma);

// Upsamples 4:2:0 chroma before unpacking. The result keeps the frame index
// passed in.
DepthMap unpack_frame(const PackedFrame& frame, const PackingConfig& cfg,
                      std::int64_t frame_index = 0);

}  // namespace depthpack::packing
