#include "depthpack/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <ostream>

#include "depthpack/csv.hpp"

namespace depthpack::channel {

char to_char(FrameType type) { return type == FrameType::I ? 'I' : 'P'; }

int ChannelConfig::effective_gop() const {
  if (gop > 0) return gop;
  return std::max(1, static_cast<int>(std::lround(fps)));
}

void ChannelConfig::validate() const {
  if (!(target_bitrate > 0.0) || !std::isfinite(target_bitrate)) {
    throw ConfigError("target bitrate must be positive");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("fps must be positive");
  if (gop < 0) throw ConfigError("gop must be >= 1 (or 0 for one second)");
  if (qp_min < 0 || qp_max > 51 || qp_min > qp_max) {
    throw ConfigError("qp range must lie within [0, 51]");
  }
}

namespace {

struct CosineTable {
  double c[kBlockSize][kBlockSize];
  CosineTable() {
    for (int k = 0; k < kBlockSize; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / kBlockSize) : std::sqrt(2.0 / kBlockSize);
      for (int n = 0; n < kBlockSize; ++n) {
        c[k][n] = alpha * std::cos((2 * n + 1) * k * std::numbers::pi / (2.0 * kBlockSize));
      }
    }
  }
};

const CosineTable& cosines() {
  static const CosineTable table;
  return table;
}

}  // namespace

Block forward_dct8x8(const Block& s) {
  const auto& c = cosines().c;
  Block tmp{};
  Block out{};
  // Rows: tmp[y][u] = sum_x c[u][x] s[y][x]
  for (int y = 0; y < kBlockSize; ++y) {
    for (int u = 0; u < kBlockSize; ++u) {
      double acc = 0.0;
      for (int x = 0; x < kBlockSize; ++x) acc += c[u][x] * s[y * kBlockSize + x];
      tmp[y * kBlockSize + u] = acc;
    }
  }
  // Columns: out[v][u] = sum_y c[v][y] tmp[y][u]
  for (int v = 0; v < kBlockSize; ++v) {
    for (int u = 0; u < kBlockSize; ++u) {
      double acc = 0.0;
      for (int y = 0; y < kBlockSize; ++y) acc += c[v][y] * tmp[y * kBlockSize + u];
      out[v * kBlockSize + u] = acc;
    }
  }
  return out;
}

Block inverse_dct8x8(const Block& coef) {
  const auto& c = cosines().c;
  Block tmp{};
  Block out{};
  for (int v = 0; v < kBlockSize; ++v) {
    for (int x = 0; x < kBlockSize; ++x) {
      double acc = 0.0;
      for (int u = 0; u < kBlockSize; ++u) acc += c[u][x] * coef[v * kBlockSize + u];
      tmp[v * kBlockSize + x] = acc;
    }
  }
  for (int y = 0; y < kBlockSize; ++y) {
    for (int x = 0; x < kBlockSize; ++x) {
      double acc = 0.0;
      for (int v = 0; v < kBlockSize; ++v) acc += c[v][y] * tmp[v * kBlockSize + x];
      out[y * kBlockSize + x] = acc;
    }
  }
  return out;
}

double quant_step(int qp) { return std::max(1.0, std::exp2((qp - 4) / 6.0)); }

int ue_length(std::uint32_t value) {
  const std::uint64_t code = static_cast<std::uint64_t>(value) + 1;
  return 2 * (std::bit_width(code) - 1) + 1;
}

int se_length(std::int32_t value) {
  const std::int64_t v = value;
  const std::uint64_t mapped = v > 0 ? 2 * v - 1 : -2 * v;
  return 2 * (std::bit_width(mapped + 1) - 1) + 1;
}

const std::array<int, 64>& zigzag_order() {
  static const std::array<int, 64> order = [] {
    std::array<int, 64> out{};
    int index = 0;
    for (int diag = 0; diag < 2 * kBlockSize - 1; ++diag) {
      for (int i = 0; i <= diag; ++i) {
        // Even diagonals run bottom-left to top-right.
        int row = (diag % 2 == 0) ? diag - i : i;
        int col = diag - row;
        if (row < kBlockSize && col < kBlockSize) out[index++] = row * kBlockSize + col;
      }
    }
    return out;
  }();
  return order;
}

int block_bits(std::span<const int, 64> levels) {
  int nonzero = 0;
  for (int level : levels) nonzero += level != 0;
  if (nonzero == 0) return 1;
  int bits = 1 + ue_length(static_cast<std::uint32_t>(nonzero - 1));
  int run = 0;
  for (int level : levels) {
    if (level == 0) {
      ++run;
      continue;
    }
    bits += ue_length(static_cast<std::uint32_t>(run)) + se_length(level);
    run = 0;
  }
  return bits;
}

namespace {

int blocks_along(int extent) { return (extent + kBlockSize - 1) / kBlockSize; }

}  // namespace

std::int64_t min_frame_bits(int width, int height, ChromaMode mode) {
  const int cw = mode == ChromaMode::Sub420 ? width / 2 : width;
  const int ch = mode == ChromaMode::Sub420 ? height / 2 : height;
  const std::int64_t luma = static_cast<std::int64_t>(blocks_along(width)) * blocks_along(height);
  const std::int64_t chroma = static_cast<std::int64_t>(blocks_along(cw)) * blocks_along(ch);
  return kFrameHeaderBits + luma + 2 * chroma;
}

namespace {

struct PlaneAnalysis {
  int width = 0;
  int height = 0;
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<double> prediction;  // padded, blocks_x*8 by blocks_y*8
  std::vector<Block> coefficients;
};

struct FrameAnalysis {
  FrameType type = FrameType::I;
  int width = 0;
  int height = 0;
  ChromaMode mode = ChromaMode::Full444;
  std::array<PlaneAnalysis, 3> planes;
};

int quantize_level(double coefficient, double step) {
  double magnitude = std::floor(std::abs(coefficient) / step + 0.5);
  return static_cast<int>(coefficient < 0.0 ? -magnitude : magnitude);
}

PlaneAnalysis analyze_plane(std::span<const std::uint8_t> samples,
                            std::span<const std::uint8_t> reference, int width,
                            int height) {
  PlaneAnalysis plane;
  plane.width = width;
  plane.height = height;
  plane.blocks_x = blocks_along(width);
  plane.blocks_y = blocks_along(height);
  const int pw = plane.blocks_x * kBlockSize;
  const int ph = plane.blocks_y * kBlockSize;
  plane.prediction.assign(static_cast<std::size_t>(pw) * ph, 128.0);
  if (!reference.empty()) {
    for (int y = 0; y < ph; ++y) {
      const int sy = std::min(y, height - 1);
      for (int x = 0; x < pw; ++x) {
        const int sx = std::min(x, width - 1);
        plane.prediction[static_cast<std::size_t>(y) * pw + x] =
            reference[static_cast<std::size_t>(sy) * width + sx];
      }
    }
  }
  plane.coefficients.resize(static_cast<std::size_t>(plane.blocks_x) * plane.blocks_y);
  for (int by = 0; by < plane.blocks_y; ++by) {
    for (int bx = 0; bx < plane.blocks_x; ++bx) {
      Block residual{};
      for (int y = 0; y < kBlockSize; ++y) {
        const int py = by * kBlockSize + y;
        const int sy = std::min(py, height - 1);
        for (int x = 0; x < kBlockSize; ++x) {
          const int px = bx * kBlockSize + x;
          const int sx = std::min(px, width - 1);
          residual[y * kBlockSize + x] =
              samples[static_cast<std::size_t>(sy) * width + sx] -
              plane.prediction[static_cast<std::size_t>(py) * pw + px];
        }
      }
      plane.coefficients[static_cast<std::size_t>(by) * plane.blocks_x + bx] =
          forward_dct8x8(residual);
    }
  }
  return plane;
}

FrameAnalysis analyze(const PackedFrame& frame, const PackedFrame* prev) {
  if (prev != nullptr &&
      (prev->width() != frame.width() || prev->height() != frame.height() ||
       prev->chroma_mode() != frame.chroma_mode())) {
    throw DimensionError("previous reconstruction does not match the frame layout");
  }
  FrameAnalysis analysis;
  analysis.type = prev == nullptr ? FrameType::I : FrameType::P;
  analysis.width = frame.width();
  analysis.height = frame.height();
  analysis.mode = frame.chroma_mode();
  for (int p = 0; p < 3; ++p) {
    std::span<const std::uint8_t> reference;
    if (prev != nullptr) reference = prev->plane(p);
    analysis.planes[p] =
        analyze_plane(frame.plane(p), reference, frame.plane_width(p), frame.plane_height(p));
  }
  return analysis;
}

std::int64_t count_bits(const FrameAnalysis& analysis, int qp) {
  const double step = quant_step(qp);
  const auto& zz = zigzag_order();
  std::int64_t bits = kFrameHeaderBits;
  std::array<int, 64> levels{};
  for (const PlaneAnalysis& plane : analysis.planes) {
    for (const Block& coef : plane.coefficients) {
      for (int k = 0; k < 64; ++k) levels[k] = quantize_level(coef[zz[k]], step);
      bits += block_bits(levels);
    }
  }
  return bits;
}

std::vector<std::uint8_t> reconstruct_plane(const PlaneAnalysis& plane, double step) {
  const int pw = plane.blocks_x * kBlockSize;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(plane.width) * plane.height);
  for (int by = 0; by < plane.blocks_y; ++by) {
    for (int bx = 0; bx < plane.blocks_x; ++bx) {
      const Block& coef = plane.coefficients[static_cast<std::size_t>(by) * plane.blocks_x + bx];
      Block dequant{};
      for (int k = 0; k < 64; ++k) dequant[k] = quantize_level(coef[k], step) * step;
      const Block residual = inverse_dct8x8(dequant);
      for (int y = 0; y < kBlockSize; ++y) {
        const int py = by * kBlockSize + y;
        if (py >= plane.height) break;
        for (int x = 0; x < kBlockSize; ++x) {
          const int px = bx * kBlockSize + x;
          if (px >= plane.width) break;
          double value = plane.prediction[static_cast<std::size_t>(py) * pw + px] +
                         residual[y * kBlockSize + x];
          value = std::clamp(std::floor(value + 0.5), 0.0, 255.0);
          out[static_cast<std::size_t>(py) * plane.width + px] = static_cast<std::uint8_t>(value);
        }
      }
    }
  }
  return out;
}

CodedFrame finish(const FrameAnalysis& analysis, int qp, std::int64_t bits) {
  const double step = quant_step(qp);
  CodedFrame coded;
  coded.bit_count = bits;
  coded.qp_used = qp;
  coded.frame_type = analysis.type;
  coded.reconstruction =
      PackedFrame(analysis.width, analysis.height, analysis.mode,
                  reconstruct_plane(analysis.planes[0], step),
                  reconstruct_plane(analysis.planes[1], step),
                  reconstruct_plane(analysis.planes[2], step));
  return coded;
}

}  // namespace

CodedFrame encode_frame(const PackedFrame& frame, const PackedFrame* prev_recon, int qp) {
  if (qp < 0 || qp > 51) throw ConfigError("qp must be in [0, 51]");
  const FrameAnalysis analysis = analyze(frame, prev_recon);
  return finish(analysis, qp, count_bits(analysis, qp));
}

double frame_target_bits(const ChannelConfig& cfg, const RateState& state) {
  const int gop = cfg.effective_gop();
  const double budget = cfg.frame_budget();
  const bool intra = state.frames_coded % gop == 0;
  const double weight = intra ? 3.0 : 1.0;
  return weight * budget * gop / (gop + 2.0) + state.credit;
}

CodedFrame rate_control(const PackedFrame& frame, const PackedFrame* prev_recon,
                        const ChannelConfig& cfg, RateState& state) {
  cfg.validate();
  const bool intra = state.frames_coded % cfg.effective_gop() == 0;
  if (!intra && prev_recon == nullptr) {
    throw ConfigError("P-frame needs the previous reconstruction");
  }
  const double budget = cfg.frame_budget();
  const double target = frame_target_bits(cfg, state);
  const FrameAnalysis analysis = analyze(frame, intra ? nullptr : prev_recon);

  int qp = cfg.qp_max;
  std::int64_t bits = count_bits(analysis, qp);
  bool overshoot = static_cast<double>(bits) > target;
  if (!overshoot) {
    int lo = cfg.qp_min;
    int hi = cfg.qp_max;  // invariant: bits(hi) fits
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      const std::int64_t mid_bits = count_bits(analysis, mid);
      if (static_cast<double>(mid_bits) <= target) {
        hi = mid;
        bits = mid_bits;
      } else {
        lo = mid + 1;
      }
    }
    qp = hi;
  }

  CodedFrame coded = finish(analysis, qp, bits);
  coded.overshoot = overshoot;
  state.credit = std::clamp(target - static_cast<double>(bits), -2.0 * budget, 2.0 * budget);
  ++state.frames_coded;
  return coded;
}

std::vector<CodedFrame> encode_sequence(std::span<const PackedFrame> frames,
                                        const ChannelConfig& cfg) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("cannot encode an empty sequence");
  for (const PackedFrame& f : frames) {
    if (f.width() != frames[0].width() || f.height() != frames[0].height() ||
        f.chroma_mode() != frames[0].chroma_mode()) {
      throw DimensionError("all frames of a sequence must share one layout");
    }
  }
  if (frames[0].chroma_mode() != cfg.chroma_mode) {
    throw ConfigError("frame chroma layout differs from the channel configuration");
  }
  RateState state;
  std::vector<CodedFrame> coded;
  coded.reserve(frames.size());
  for (const PackedFrame& frame : frames) {
    const PackedFrame* prev = coded.empty() ? nullptr : &coded.back().reconstruction;
    coded.push_back(rate_control(frame, prev, cfg, state));
  }
  return coded;
}

double achieved_bitrate(std::span<const CodedFrame> frames, double fps) {
  if (frames.empty()) return 0.0;
  double bits = 0.0;
  for (const CodedFrame& f : frames) bits += static_cast<double>(f.bit_count);
  return bits * fps / static_cast<double>(frames.size());
}

void write_size_csv(std::ostream& out, std::span<const CodedFrame> frames) {
  csv::write_version_comment(out);
  out << "frame_index,type,qp,bits\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out << i << ',' << to_char(frames[i].frame_type) << ',' << frames[i].qp_used << ','
        << frames[i].bit_count << '\n';
  }
}

SequenceCoder simulated_coder(ChannelConfig cfg) {
  return [cfg](std::span<const PackedFrame> frames) { return encode_sequence(frames, cfg); };
}

SequenceCoder lossless_coder() {
  return [](std::span<const PackedFrame> frames) {
    std::vector<CodedFrame> out;
    out.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const PackedFrame& f = frames[i];
      CodedFrame coded;
      coded.bit_count = 8 * static_cast<std::int64_t>(f.y().size() + f.u().size() + f.v().size());
      coded.frame_type = FrameType::I;
      coded.reconstruction = f;
      out.push_back(std::move(coded));
    }
    return out;
  };
}

}  // namespace depthpack::channel
