#include "depthpack/metrics.hpp"

#include <cmath>
#include <ostream>

#include "depthpack/csv.hpp"
#include "depthpack/packing.hpp"
#include "depthpack/parallel.hpp"

namespace depthpack::metrics {

namespace {

void check_same_size(const DepthMap& a, const DepthMap& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError("depth maps differ in size");
  }
}

double abs_sum(const DepthMap& a, const DepthMap& b) {
  const auto va = a.values();
  const auto vb = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    sum += std::abs(static_cast<double>(va[i]) - static_cast<double>(vb[i]));
  }
  return sum;
}

}  // namespace

double depth_mae(const DepthMap& a, const DepthMap& b) {
  check_same_size(a, b);
  return abs_sum(a, b) / static_cast<double>(a.size());
}

double scene_mae(const DepthMap& a, const DepthMap& b, const NearFar& nf) {
  check_same_size(a, b);
  const auto va = a.values();
  const auto vb = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    sum += std::abs(linearize(va[i], nf) - linearize(vb[i], nf));
  }
  return sum / static_cast<double>(va.size());
}

ErrorReport decompose_error(const DepthMap& gt, const DepthMap& packed_ref,
                            const DepthMap& decoded, std::int64_t achieved_bits) {
  ErrorReport report;
  report.frame_index = gt.frame_index();
  report.packing_mae = depth_mae(packed_ref, gt);
  report.codec_mae = depth_mae(decoded, packed_ref);
  report.mae = depth_mae(decoded, gt);
  report.achieved_bits = achieved_bits;
  return report;
}

PipelineResult run_pipeline(std::span<const DepthMap> maps, const PackingConfig& cfg,
                            ChromaMode chroma, const channel::SequenceCoder& coder,
                            double fps, std::optional<NearFar> scene) {
  if (maps.empty()) throw ConfigError("cannot run the pipeline on an empty sequence");
  std::vector<PackedFrame> packed;
  packed.reserve(maps.size());
  for (const DepthMap& m : maps) packed.push_back(packing::pack_frame(m, cfg, chroma));

  PipelineResult result;
  result.coded = coder(packed);
  if (result.coded.size() != maps.size()) {
    throw DimensionError("channel returned a different number of frames");
  }
  double pooled = 0.0;
  double scene_sum = 0.0;
  std::size_t pixels = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const DepthMap& gt = maps[i];
    DepthMap reference = packing::unpack_frame(packed[i], cfg, gt.frame_index());
    DepthMap decoded = packing::unpack_frame(result.coded[i].reconstruction, cfg, gt.frame_index());
    ErrorReport report = decompose_error(gt, reference, decoded, result.coded[i].bit_count);
    result.mean_mae += report.mae;
    result.mean_packing_mae += report.packing_mae;
    result.mean_codec_mae += report.codec_mae;
    pooled += abs_sum(decoded, gt);
    pixels += gt.size();
    if (scene) scene_sum += scene_mae(decoded, gt, *scene);
    result.frames.push_back(report);
    result.decoded.push_back(std::move(decoded));
  }
  const double n = static_cast<double>(maps.size());
  result.mean_mae /= n;
  result.mean_packing_mae /= n;
  result.mean_codec_mae /= n;
  result.pooled_mae = pooled / static_cast<double>(pixels);
  if (scene) result.scene_mae = scene_sum / n;
  result.achieved_bps = channel::achieved_bitrate(result.coded, fps);
  return result;
}

PipelineResult run_pipeline(std::span<const DepthMap> maps, const PackingConfig& cfg,
                            const channel::ChannelConfig& channel_cfg,
                            std::optional<NearFar> scene) {
  return run_pipeline(maps, cfg, channel_cfg.chroma_mode, channel::simulated_coder(channel_cfg),
                      channel_cfg.fps, scene);
}

std::vector<SweepRow> sweep(std::span<const DepthMap> maps, const SweepSpec& spec) {
  if (spec.configs.empty() || spec.bitrates.empty() || spec.chroma_modes.empty()) {
    throw ConfigError("sweep needs at least one config, bitrate and chroma mode");
  }
  std::vector<SweepRow> rows;
  for (const PackingConfig& cfg : spec.configs) {
    for (ChromaMode chroma : spec.chroma_modes) {
      for (double bitrate : spec.bitrates) {
        SweepRow row;
        row.config = cfg;
        row.chroma = chroma;
        row.target_bps = bitrate;
        rows.push_back(row);
      }
    }
  }
  parallel_for(rows.size(), spec.workers, [&](std::size_t i) {
    SweepRow& row = rows[i];
    channel::ChannelConfig cc = spec.channel;
    cc.target_bitrate = row.target_bps;
    cc.chroma_mode = row.chroma;
    PipelineResult run = run_pipeline(maps, row.config, cc, spec.scene);
    row.achieved_bps = run.achieved_bps;
    row.mae = run.mean_mae;
    row.packing_mae = run.mean_packing_mae;
    row.codec_mae = run.mean_codec_mae;
    row.pooled_mae = run.pooled_mae;
    row.scene_mae = run.scene_mae;
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  const bool scene = !rows.empty() && rows.front().scene_mae.has_value();
  csv::write_version_comment(out);
  out << "config,bits_or_np,chroma,target_bps,achieved_bps,mae,packing_mae,codec_mae,pooled_mae";
  if (scene) out << ",mae_scene";
  out << '\n';
  for (const SweepRow& r : rows) {
    out << r.config.scheme_name() << ',' << r.config.parameter() << ',' << to_string(r.chroma)
        << ',' << csv::format_double(r.target_bps) << ',' << csv::format_double(r.achieved_bps)
        << ',' << csv::format_double(r.mae) << ',' << csv::format_double(r.packing_mae) << ','
        << csv::format_double(r.codec_mae) << ',' << csv::format_double(r.pooled_mae);
    if (scene) out << ',' << csv::format_double(r.scene_mae.value_or(0.0));
    out << '\n';
  }
}

}  // namespace depthpack::metrics
