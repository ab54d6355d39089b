#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "depthpack/types.hpp"

namespace depthpack::channel {

enum class FrameType { I, P };

char to_char(FrameType type);

struct ChannelConfig {
  double target_bitrate = 10e6;  // bits per second
  double fps = 90.0;
  int gop = 0;                   // frames; 0 means one second (round(fps))
  ChromaMode chroma_mode = ChromaMode::Full444;
  int qp_min = 0;
  int qp_max = 51;

  int effective_gop() const;
  double frame_budget() const { return target_bitrate / fps; }
  // Throws ConfigError on a non-positive bitrate/fps, gop < 0 or a qp range
  // outside [0, 51].
  void validate() const;
};

struct CodedFrame {
  std::int64_t bit_count = 0;
  int qp_used = 0;
  FrameType frame_type = FrameType::I;
  PackedFrame reconstruction;
  // Set by rate control when even qp_max exceeded the frame budget.
  bool overshoot = false;
};

inline constexpr int kBlockSize = 8;
using Block = std::array<double, kBlockSize * kBlockSize>;

// Orthonormal 8x8 DCT-II and its inverse (row-major, [v][u]).
Block forward_dct8x8(const Block& samples);
Block inverse_dct8x8(const Block& coefficients);

// Quantizer step size; doubles every 6 qp and is never below 1.
double quant_step(int qp);

// Length in bits of the unsigned / signed exp-Golomb code for a value.
int ue_length(std::uint32_t value);
int se_length(std::int32_t value);

// Bits for one block of quantized levels given in zigzag order: a coded
// flag, then the nonzero count and (zero run, level) pairs.
int block_bits(std::span<const int, 64> zigzag_levels);

inline constexpr int kFrameHeaderBits = 32;

// Frame coded with nothing but all-zero blocks.
std::int64_t min_frame_bits(int width, int height, ChromaMode mode);

const std::array<int, 64>& zigzag_order();

// Transform-codes one frame against a constant 128 prediction (I, when
// prev_recon is null) or the co-located previous reconstruction (P).
// Dimensions that are not multiples of 8 are padded by edge replication.
CodedFrame encode_frame(const PackedFrame& frame, const PackedFrame* prev_recon, int qp);

// Budget bookkeeping carried from frame to frame by rate_control.
struct RateState {
  std::int64_t frames_coded = 0;
  double credit = 0.0;  // bits carried into the next frame, within +-2 frame budgets
};

// Target bits for the next frame. Within a GOP an I-frame is weighted 3x a
// P-frame and the weights are normalized so the GOP sums to gop frame
// budgets; the carried credit is added on top.
double frame_target_bits(const ChannelConfig& cfg, const RateState& state);

// Codes the next frame of a stream at the lowest qp whose size fits the
// frame target (binary search, bit count is monotone in qp). Frame type
// follows the GOP position in state.
CodedFrame rate_control(const PackedFrame& frame, const PackedFrame* prev_recon,
                        const ChannelConfig& cfg, RateState& state);

// Deterministic stateful loop over rate_control.
std::vector<CodedFrame> encode_sequence(std::span<const PackedFrame> frames,
                                        const ChannelConfig& cfg);

double achieved_bitrate(std::span<const CodedFrame> frames, double fps);

// frame_index,type,qp,bits
void write_size_csv(std::ostream& out, std::span<const CodedFrame> frames);

// Anything that turns a packed sequence into decoded frames plus sizes.
using SequenceCoder =
    std::function<std::vector<CodedFrame>(std::span<const PackedFrame>)>;

SequenceCoder simulated_coder(ChannelConfig cfg);

// Passes frames through untouched; sizes are the raw plane bits.
SequenceCoder lossless_coder();

}  // namespace depthpack::channel
