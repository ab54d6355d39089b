#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "depthpack/channel.hpp"
#include "depthpack/types.hpp"

namespace depthpack::metrics {

// Per-frame errors in normalized depth units.
//   packing_mae = MAE(packed reference, ground truth)
//   codec_mae   = MAE(decoded, packed reference)
//   mae         = MAE(decoded, ground truth)
// The codec part can partly cancel the packing part, so mae is not the sum.
struct ErrorReport {
  std::int64_t frame_index = 0;
  double mae = 0.0;
  double packing_mae = 0.0;
  double codec_mae = 0.0;
  std::int64_t achieved_bits = 0;
};

// Mean absolute difference; throws DimensionError on a size mismatch.
double depth_mae(const DepthMap& a, const DepthMap& b);

// Mean absolute difference after mapping both maps to view-space distance.
double scene_mae(const DepthMap& a, const DepthMap& b, const NearFar& nf);

ErrorReport decompose_error(const DepthMap& gt, const DepthMap& packed_ref,
                            const DepthMap& decoded, std::int64_t achieved_bits = 0);

struct PipelineResult {
  std::vector<ErrorReport> frames;
  std::vector<channel::CodedFrame> coded;
  std::vector<DepthMap> decoded;
  double achieved_bps = 0.0;
  double mean_mae = 0.0;  // mean of per-frame MAE
  double mean_packing_mae = 0.0;
  double mean_codec_mae = 0.0;
  double pooled_mae = 0.0;  // all pixels of all frames pooled
  std::optional<double> scene_mae;
};

// pack -> code -> unpack for a whole sequence. The packed reference is the
// unpacked, uncompressed packed frame (including chroma subsampling).
PipelineResult run_pipeline(std::span<const DepthMap> maps, const PackingConfig& cfg,
                            ChromaMode chroma, const channel::SequenceCoder& coder,
                            double fps, std::optional<NearFar> scene = std::nullopt);

// Same with the simulated channel; cfg.chroma_mode selects the layout.
PipelineResult run_pipeline(std::span<const DepthMap> maps, const PackingConfig& cfg,
                            const channel::ChannelConfig& channel_cfg,
                            std::optional<NearFar> scene = std::nullopt);

struct SweepSpec {
  std::vector<PackingConfig> configs;
  std::vector<double> bitrates;
  std::vector<ChromaMode> chroma_modes{ChromaMode::Full444};
  channel::ChannelConfig channel;  // bitrate and chroma are overridden per cell
  unsigned workers = 0;
  std::optional<NearFar> scene;
};

struct SweepRow {
  PackingConfig config;
  ChromaMode chroma = ChromaMode::Full444;
  double target_bps = 0.0;
  double achieved_bps = 0.0;
  double mae = 0.0;
  double packing_mae = 0.0;
  double codec_mae = 0.0;
  double pooled_mae = 0.0;
  std::optional<double> scene_mae;
};

// Full factorial over configs x chroma modes x bitrates, in that nesting
// order regardless of which worker finishes first.
std::vector<SweepRow> sweep(std::span<const DepthMap> maps, const SweepSpec& spec);

// config,bits_or_np,chroma,target_bps,achieved_bps,mae,packing_mae,codec_mae,pooled_mae[,mae_scene]
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace depthpack::metrics
