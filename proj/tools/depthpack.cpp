// depthpack command-line tool. Run `depthpack --help` or
// `depthpack <command> --help` for the flags of each command.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "depthpack/channel.hpp"
#include "depthpack/csv.hpp"
#include "depthpack/external.hpp"
#include "depthpack/features.hpp"
#include "depthpack/io.hpp"
#include "depthpack/metrics.hpp"
#include "depthpack/oracle.hpp"
#include "depthpack/packing.hpp"
#include "depthpack/predictor.hpp"
#include "depthpack/synth.hpp"
#include "depthpack/y4m.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace depthpack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

// Output files must go into an existing directory.
const CLI::Validator kOutputPath(
    [](std::string& value) -> std::string {
      const fs::path parent = fs::path(value).parent_path();
      if (!parent.empty() && !fs::is_directory(parent)) {
        return "output directory does not exist: " + parent.string();
      }
      return {};
    },
    "OUTPUT");

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError("failed writing " + path.string());
}

std::pair<int, int> fps_fraction(double fps) {
  if (std::abs(fps - std::round(fps)) < 1e-9) return {static_cast<int>(std::round(fps)), 1};
  return {static_cast<int>(std::round(fps * 1000.0)), 1000};
}

std::vector<ChromaMode> parse_chroma_list(const std::vector<std::string>& items) {
  std::vector<ChromaMode> out;
  for (const std::string& s : items) out.push_back(parse_chroma_mode(s));
  if (out.empty()) throw ConfigError("no chroma mode given");
  return out;
}

void check_bitrates(const std::vector<double>& bitrates) {
  if (bitrates.empty()) throw ConfigError("no bitrate given");
  for (double b : bitrates) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("bitrates must be positive");
  }
}

// Labels of one dataset joined with its per-frame features.
struct LabeledSet {
  io::Dataset dataset;
  std::vector<oracle::OracleRecord> records;
  std::vector<predictor::FeatureVector> features;  // aligned with records
};

LabeledSet load_labeled(const std::string& manifest, const std::string& labels) {
  LabeledSet set;
  set.dataset = io::load_dataset(manifest);
  std::ifstream in(labels);
  if (!in) throw ConfigError("cannot open labels " + labels);
  set.records = oracle::read_labels_csv(in);
  if (set.records.empty()) throw DataError(labels + " holds no labels");
  const auto base = predictor::extract_sequence_features(set.dataset.maps, set.dataset.cameras, 1.0);
  for (const oracle::OracleRecord& r : set.records) {
    if (r.frame_index < 0 || r.frame_index >= static_cast<std::int64_t>(base.size())) {
      throw DataError(labels + ": frame " + std::to_string(r.frame_index) + " is not in " + manifest);
    }
    predictor::FeatureVector f = base[static_cast<std::size_t>(r.frame_index)];
    f.log2_bitrate = std::log2(r.bitrate);
    set.features.push_back(f);
  }
  return set;
}

void require_pairs(const std::vector<std::string>& manifests, const std::vector<std::string>& labels) {
  if (manifests.empty()) throw ConfigError("at least one --manifest/--labels pair is required");
  if (manifests.size() != labels.size()) {
    throw ConfigError("every --manifest needs a matching --labels file");
  }
}

// Frame index from which a record counts as held out: the last `fraction`
// of the frames present in the labels.
std::int64_t holdout_start(const std::vector<oracle::OracleRecord>& records, double fraction) {
  std::vector<std::int64_t> frames;
  for (const auto& r : records) frames.push_back(r.frame_index);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  const auto keep = static_cast<std::size_t>(std::floor((1.0 - fraction) * frames.size() + 0.5));
  return keep >= frames.size() ? frames.back() + 1 : frames[keep];
}

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double rank = p * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (rank - lo) * (values[hi] - values[lo]);
}

// --- pack / unpack -------------------------------------------------------

struct PackArgs {
  std::string manifest;
  std::string scheme = "VBP";
  int param = 0;
  std::string chroma = "444";
  std::string out;
  bool planes = false;
};

PackingConfig packing_from(const std::string& scheme, int param) {
  if (param == 0) param = scheme == "RP" || scheme == "rp" ? 2048 : 16;
  std::string upper = scheme;
  std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
  return PackingConfig::parse(upper, param);
}

int cmd_pack(const PackArgs& a) {
  const PackingConfig cfg = packing_from(a.scheme, a.param);
  const ChromaMode chroma = parse_chroma_mode(a.chroma);
  const io::Dataset ds = io::load_dataset(a.manifest);
  std::vector<PackedFrame> frames;
  for (const DepthMap& m : ds.maps) frames.push_back(packing::pack_frame(m, cfg, chroma));
  const auto [num, den] = fps_fraction(ds.manifest.fps);
  if (!a.planes) {
    y4m::write_file(a.out, frames, num, den);
  } else {
    fs::create_directories(a.out);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      std::ostringstream name;
      name << "frame_" << std::setw(4) << std::setfill('0') << i << ".yuv";
      std::ofstream out(fs::path(a.out) / name.str(), std::ios::binary);
      for (int p = 0; p < 3; ++p) {
        const auto plane = frames[i].plane(p);
        out.write(reinterpret_cast<const char*>(plane.data()), static_cast<std::streamsize>(plane.size()));
      }
      if (!out) throw DataError("failed writing " + name.str());
    }
    const nlohmann::json meta = {{"width", frames[0].width()}, {"height", frames[0].height()},
                                 {"chroma", to_string(chroma)}, {"frames", frames.size()},
                                 {"fps", ds.manifest.fps}, {"packing", cfg.label()}};
    std::ofstream side(fs::path(a.out) / "planes.json");
    side << meta.dump(2) << '\n';
  }
  std::cout << "packed " << frames.size() << " frames with " << cfg.label() << " "
            << to_string(chroma) << " -> " << a.out << '\n';
  return 0;
}

struct UnpackArgs {
  std::string input;
  std::string scheme = "VBP";
  int param = 0;
  std::string out;
  std::string format = "pfm";
  std::string reference;
};

std::vector<PackedFrame> read_planes_dir(const fs::path& dir, double* fps) {
  std::ifstream side(dir / "planes.json");
  if (!side) throw ConfigError("no planes.json in " + dir.string());
  nlohmann::json meta;
  int w = 0, h = 0;
  std::size_t count = 0;
  ChromaMode chroma = ChromaMode::Full444;
  try {
    meta = nlohmann::json::parse(side);
    w = meta.at("width").get<int>();
    h = meta.at("height").get<int>();
    count = meta.at("frames").get<std::size_t>();
    chroma = parse_chroma_mode(meta.at("chroma").get<std::string>());
    *fps = meta.value("fps", 90.0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed planes.json: " + std::string(e.what()));
  }
  const PackedFrame shape = PackedFrame::filled(w, h, chroma, 0, 0, 0);
  std::vector<PackedFrame> frames;
  for (std::size_t i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << i << ".yuv";
    std::ifstream in(dir / name.str(), std::ios::binary);
    if (!in) throw DataError("missing plane file " + name.str());
    std::vector<std::uint8_t> planes[3];
    for (int p = 0; p < 3; ++p) {
      planes[p].resize(shape.plane(p).size());
      in.read(reinterpret_cast<char*>(planes[p].data()), static_cast<std::streamsize>(planes[p].size()));
      if (!in) throw DataError("truncated plane file " + name.str());
    }
    frames.emplace_back(w, h, chroma, std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
  }
  return frames;
}

int cmd_unpack(const UnpackArgs& a) {
  const PackingConfig cfg = packing_from(a.scheme, a.param);
  const io::DepthFormat format = io::parse_depth_format(a.format);
  std::vector<PackedFrame> frames;
  double fps = 90.0;
  if (fs::is_directory(a.input)) {
    frames = read_planes_dir(a.input, &fps);
  } else {
    y4m::StreamHeader header;
    frames = y4m::read_file(a.input, &header);
    fps = static_cast<double>(header.fps_num) / header.fps_den;
  }
  if (frames.empty()) throw DataError(a.input + " holds no frames");
  std::optional<io::Dataset> reference;
  if (!a.reference.empty()) reference = io::load_dataset(a.reference);
  std::vector<DepthMap> maps;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    maps.push_back(packing::unpack_frame(frames[i], cfg, static_cast<std::int64_t>(i)));
  }
  const NearFar nf = reference ? reference->manifest.near_far : NearFar();
  io::write_dataset(a.out, fs::path(a.out).stem().string(), maps, {}, format, fps, nf);
  std::cout << "unpacked " << maps.size() << " frames with " << cfg.label() << " -> " << a.out << '\n';
  if (reference) {
    if (reference->maps.size() != maps.size()) {
      throw DimensionError("reference has " + std::to_string(reference->maps.size()) +
                           " frames, the stream " + std::to_string(maps.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < maps.size(); ++i) sum += metrics::depth_mae(reference->maps[i], maps[i]);
    std::cout << "mae " << csv::format_double(sum / maps.size());
    if (cfg.is_vbp()) {
      const int bits = cfg.bits();
      const double bound = std::ldexp(1.0, -bits) + 2.0 / 255.0 * std::ldexp(1.0, -std::min(bits, 16));
      std::cout << " bound " << csv::format_double(bound);
    }
    std::cout << '\n';
  }
  return 0;
}

// --- sweep / oracle ------------------------------------------------------

struct ChannelArgs {
  int gop = 0;
  int qp_min = 0;
  int qp_max = 51;
  double fps = 0.0;  // 0: the manifest's

  channel::ChannelConfig make(double manifest_fps) const {
    channel::ChannelConfig c;
    c.fps = fps > 0.0 ? fps : manifest_fps;
    c.gop = gop;
    c.qp_min = qp_min;
    c.qp_max = qp_max;
    return c;
  }
};

void add_channel_flags(CLI::App* cmd, ChannelArgs& c) {
  cmd->add_option("--gop", c.gop, "GOP length in frames (0: one second)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--qp-min", c.qp_min, "Lowest quantizer")->check(CLI::Range(0, 51));
  cmd->add_option("--qp-max", c.qp_max, "Highest quantizer")->check(CLI::Range(0, 51));
  cmd->add_option("--fps", c.fps, "Frame rate override")->check(CLI::PositiveNumber);
}

struct SweepArgs {
  std::string manifest;
  std::vector<int> vbp_bits;
  std::vector<int> rp_periods;
  std::vector<double> bitrates;
  std::vector<std::string> chroma{"444"};
  ChannelArgs channel;
  bool scene = false;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, unsigned workers) {
  check_bitrates(a.bitrates);
  metrics::SweepSpec spec;
  for (int b : a.vbp_bits) spec.configs.push_back(PackingConfig::vbp(b));
  for (int n : a.rp_periods) spec.configs.push_back(PackingConfig::rp(n));
  if (spec.configs.empty()) {
    for (int b : oracle::default_precision_set()) spec.configs.push_back(PackingConfig::vbp(b));
    for (int n : {512, 1024, 2048, 4096, 8192}) spec.configs.push_back(PackingConfig::rp(n));
  }
  spec.bitrates = a.bitrates;
  spec.chroma_modes = parse_chroma_list(a.chroma);
  const io::Dataset ds = io::load_dataset(a.manifest);
  spec.channel = a.channel.make(ds.manifest.fps);
  spec.channel.validate();
  spec.workers = workers;
  if (a.scene) spec.scene = ds.manifest.near_far;
  const auto rows = metrics::sweep(ds.maps, spec);
  std::ofstream out = open_output(a.out);
  metrics::write_sweep_csv(out, rows);
  finish_output(out, a.out);
  std::cout << "wrote " << rows.size() << " sweep rows -> " << a.out << '\n';
  return 0;
}

struct OracleArgs {
  std::string manifest;
  std::vector<double> bitrates;
  std::vector<int> precisions;
  std::string chroma = "444";
  ChannelArgs channel;
  std::string out;
};

int cmd_oracle(const OracleArgs& a, unsigned workers) {
  check_bitrates(a.bitrates);
  const std::vector<int> precisions =
      a.precisions.empty() ? oracle::default_precision_set() : oracle::normalize_precision_set(a.precisions);
  const io::Dataset ds = io::load_dataset(a.manifest);
  channel::ChannelConfig cfg = a.channel.make(ds.manifest.fps);
  cfg.chroma_mode = parse_chroma_mode(a.chroma);
  std::vector<oracle::OracleRecord> all;
  for (double bitrate : a.bitrates) {
    cfg.target_bitrate = bitrate;
    cfg.validate();
    auto records = oracle::oracle_labels(ds.maps, bitrate, precisions, cfg, workers);
    std::cout << "bitrate " << csv::format_double(bitrate) << ": " << records.size()
              << " frames, " << oracle::switch_count(records) << " best-precision switches\n";
    all.insert(all.end(), records.begin(), records.end());
  }
  std::ofstream out = open_output(a.out);
  oracle::write_labels_csv(out, all);
  finish_output(out, a.out);
  std::cout << "wrote " << all.size() << " labels -> " << a.out << '\n';
  return 0;
}

// --- train / predict / select --------------------------------------------

struct TrainArgs {
  std::vector<std::string> manifests;
  std::vector<std::string> labels;
  std::string model;
  std::string loss_log;
  predictor::TrainParams params;
  std::string split = "temporal";
  bool balance = true;
};

int cmd_train(TrainArgs a) {
  require_pairs(a.manifests, a.labels);
  if (a.split == "temporal") {
    a.params.split = predictor::SplitMode::Temporal;
  } else if (a.split == "random") {
    a.params.split = predictor::SplitMode::Random;
  } else {
    throw ConfigError("--split must be temporal or random");
  }
  std::vector<predictor::Sample> samples;
  std::vector<int> precisions;
  for (std::size_t g = 0; g < a.manifests.size(); ++g) {
    const LabeledSet set = load_labeled(a.manifests[g], a.labels[g]);
    for (std::size_t i = 0; i < set.records.size(); ++i) {
      const auto& r = set.records[i];
      if (precisions.empty()) precisions = r.precisions;
      if (r.precisions != precisions) throw DataError("label files disagree on the precision set");
      samples.push_back({set.features[i], r.errors_by_precision, static_cast<int>(g), r.frame_index});
    }
  }
  if (a.balance) samples = predictor::balance_groups(samples, a.params.seed);
  const auto result = predictor::train(samples, precisions, a.params);
  predictor::save_model(a.model, result.model);
  if (!a.loss_log.empty()) {
    std::ofstream log = open_output(a.loss_log);
    csv::write_version_comment(log);
    log << "epoch,train_l1,test_l1\n";
    for (const auto& e : result.history) {
      log << e.epoch << ',' << csv::format_double(e.train_l1) << ',' << csv::format_double(e.test_l1) << '\n';
    }
    finish_output(log, a.loss_log);
  }
  std::cout << "trained on " << result.train_indices.size() << " samples, held out "
            << result.test_indices.size() << '\n';
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    std::cout << "final train_l1 " << csv::format_double(last.train_l1) << " test_l1 "
              << csv::format_double(last.test_l1) << '\n';
  }
  std::cout << "model -> " << a.model << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string manifest;
  std::vector<double> bitrates;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  check_bitrates(a.bitrates);
  const predictor::RegressorModel model = predictor::load_model(a.model);
  const io::Dataset ds = io::load_dataset(a.manifest);
  std::ofstream out = open_output(a.out);
  csv::write_version_comment(out);
  out << "frame_index,bitrate";
  for (int b : model.precisions) out << ",pred_err_" << b;
  out << ",selected_bits\n";
  for (double bitrate : a.bitrates) {
    const auto feats = predictor::extract_sequence_features(ds.maps, ds.cameras, bitrate);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const auto pred = predictor::forward(model, feats[i]);
      out << ds.maps[i].frame_index() << ',' << csv::format_double(bitrate);
      for (double p : pred) out << ',' << csv::format_double(p);
      out << ',' << predictor::select_precision(pred, model.precisions) << '\n';
    }
  }
  finish_output(out, a.out);
  std::cout << "wrote predictions for " << ds.maps.size() * a.bitrates.size() << " frames -> " << a.out << '\n';
  return 0;
}

struct SelectArgs {
  std::string model;
  std::vector<std::string> manifests;
  std::vector<std::string> labels;
  double holdout = 0.0;
  std::string baseline = "default";
  std::string out;
};

int cmd_select(const SelectArgs& a) {
  require_pairs(a.manifests, a.labels);
  if (a.baseline != "default" && a.baseline != "fitted") {
    throw ConfigError("--baseline must be default or fitted");
  }
  const predictor::RegressorModel model = predictor::load_model(a.model);
  std::vector<oracle::OracleRecord> eval, fit;
  std::vector<int> model_choice;
  std::vector<std::size_t> group;
  for (std::size_t g = 0; g < a.manifests.size(); ++g) {
    const LabeledSet set = load_labeled(a.manifests[g], a.labels[g]);
    const std::int64_t start = a.holdout > 0.0 ? holdout_start(set.records, a.holdout) : 0;
    for (std::size_t i = 0; i < set.records.size(); ++i) {
      if (set.records[i].frame_index < start) {
        fit.push_back(set.records[i]);
        continue;
      }
      eval.push_back(set.records[i]);
      group.push_back(g);
      model_choice.push_back(predictor::select_precision(model, set.features[i]));
    }
  }
  if (eval.empty()) throw DataError("no labels left to evaluate");
  predictor::BaselinePolicy policy;
  if (a.baseline == "fitted") {
    if (fit.empty()) throw ConfigError("--baseline fitted needs --holdout > 0 to leave fitting data");
    policy = predictor::BaselinePolicy::fit(fit);
  }
  std::vector<int> baseline_choice;
  for (const auto& r : eval) baseline_choice.push_back(policy(r.bitrate));
  const auto model_report = predictor::evaluate_choices(eval, model_choice);
  const auto base_report = predictor::evaluate_choices(eval, baseline_choice);

  std::ofstream out = open_output(a.out);
  csv::write_version_comment(out);
  out << "dataset,frame_index,bitrate,selected_bits,selected_error,oracle_bits,oracle_error,baseline_bits,baseline_error\n";
  auto error_of = [](const oracle::OracleRecord& r, int bits) {
    const auto it = std::find(r.precisions.begin(), r.precisions.end(), bits);
    return r.errors_by_precision[static_cast<std::size_t>(it - r.precisions.begin())];
  };
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& r = eval[i];
    out << group[i] << ',' << r.frame_index << ',' << csv::format_double(r.bitrate) << ',' << model_choice[i] << ','
        << csv::format_double(error_of(r, model_choice[i])) << ',' << r.best_precision << ','
        << csv::format_double(error_of(r, r.best_precision)) << ',' << baseline_choice[i] << ','
        << csv::format_double(error_of(r, baseline_choice[i])) << '\n';
  }
  finish_output(out, a.out);
  std::cout << "frames " << eval.size() << '\n'
            << "model    fraction_optimal " << csv::format_double(model_report.fraction_optimal)
            << " mean_error " << csv::format_double(model_report.mean_error) << '\n'
            << "baseline fraction_optimal " << csv::format_double(base_report.fraction_optimal)
            << " mean_error " << csv::format_double(base_report.mean_error) << '\n'
            << "oracle   mean_error " << csv::format_double(model_report.oracle_error) << '\n';
  if (a.manifests.size() > 1) {
    for (std::size_t g = 0; g < a.manifests.size(); ++g) {
      std::vector<oracle::OracleRecord> sub;
      std::vector<int> sub_model, sub_base;
      for (std::size_t i = 0; i < eval.size(); ++i) {
        if (group[i] != g) continue;
        sub.push_back(eval[i]);
        sub_model.push_back(model_choice[i]);
        sub_base.push_back(baseline_choice[i]);
      }
      if (sub.empty()) continue;
      std::cout << "dataset " << g << " frames " << sub.size() << " model fraction_optimal "
                << csv::format_double(predictor::evaluate_choices(sub, sub_model).fraction_optimal)
                << " baseline fraction_optimal "
                << csv::format_double(predictor::evaluate_choices(sub, sub_base).fraction_optimal) << '\n';
    }
  }
  return 0;
}

// --- bench / synth / encode ----------------------------------------------

struct BenchArgs {
  std::string model;
  int iters = 200;
  int size = 512;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a) {
  const predictor::RegressorModel model =
      a.model.empty() ? predictor::RegressorModel::create(oracle::default_precision_set(), 64, a.seed)
                      : predictor::load_model(a.model);
  synth::Options o;
  o.kind = synth::Kind::Flythrough;
  o.frames = 2;
  o.width = o.height = a.size;
  o.seed = a.seed;
  const synth::Sequence seq = synth::generate(o);
  const predictor::CameraPair cams{seq.cameras[0], seq.cameras[1]};
  std::vector<double> full_ms, infer_ms;
  const predictor::FeatureVector fixed = predictor::extract_features(seq.maps[1], &seq.maps[0], cams, 1e7);
  int sink = 0;
  for (int i = 0; i < a.iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = predictor::extract_features(seq.maps[1], &seq.maps[0], cams, 1e7);
    sink += predictor::select_precision(model, f);
    const auto t1 = std::chrono::steady_clock::now();
    sink += predictor::select_precision(model, fixed);
    const auto t2 = std::chrono::steady_clock::now();
    full_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    infer_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
  }
  std::cout << "iterations " << a.iters << " map " << a.size << "x" << a.size << " (checksum "
            << sink << ")\n"
            << "features+inference median_ms " << csv::format_double(percentile(full_ms, 0.5))
            << " p95_ms " << csv::format_double(percentile(full_ms, 0.95)) << '\n'
            << "inference median_ms " << csv::format_double(percentile(infer_ms, 0.5)) << " p95_ms "
            << csv::format_double(percentile(infer_ms, 0.95)) << '\n';
  return 0;
}

struct SynthArgs {
  synth::Options options;
  std::string kind = "flythrough";
  std::string format = "pfm";
  double near_plane = 0.1;
  double far_plane = 100.0;
  std::string out;
};

int cmd_synth(SynthArgs a, unsigned workers) {
  a.options.kind = synth::parse_kind(a.kind);
  a.options.near_far = NearFar(a.near_plane, a.far_plane);
  a.options.workers = workers;
  const synth::Sequence seq = synth::generate(a.options);
  io::write_dataset(a.out, a.kind, seq.maps, seq.cameras, io::parse_depth_format(a.format), seq.fps,
                    seq.near_far);
  std::cout << "wrote " << seq.maps.size() << " " << a.kind << " frames -> " << a.out << '\n';
  return 0;
}

struct EncodeArgs {
  std::string input;
  double bitrate = 10e6;
  ChannelArgs channel;
  std::string sizes;
  std::string recon;
  std::string encoder_cmd;
  std::string decoder_cmd;
};

int cmd_encode(const EncodeArgs& a) {
  y4m::StreamHeader header;
  const auto frames = y4m::read_file(a.input, &header);
  if (frames.empty()) throw DataError(a.input + " holds no frames");
  channel::ChannelConfig cfg = a.channel.make(static_cast<double>(header.fps_num) / header.fps_den);
  cfg.target_bitrate = a.bitrate;
  cfg.chroma_mode = header.chroma_mode;
  cfg.validate();
  const auto coded = a.encoder_cmd.empty()
                         ? channel::encode_sequence(frames, cfg)
                         : external::external_encode(frames, cfg, {a.encoder_cmd, a.decoder_cmd});
  if (!a.sizes.empty()) {
    std::ofstream out = open_output(a.sizes);
    channel::write_size_csv(out, coded);
    finish_output(out, a.sizes);
  }
  if (!a.recon.empty()) {
    std::vector<PackedFrame> recon;
    for (const auto& c : coded) recon.push_back(c.reconstruction);
    y4m::write_file(a.recon, recon, header.fps_num, header.fps_den);
  }
  std::cout << "frames " << coded.size() << " target_bps " << csv::format_double(a.bitrate)
            << " achieved_bps " << csv::format_double(channel::achieved_bitrate(coded, cfg.fps)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-precision depth packing through a simulated video channel"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string("depthpack ") + DEPTHPACK_VERSION);
  unsigned workers = 0;
  app.add_option("--workers", workers, "Worker threads (0: DEPTHPACK_WORKERS or all cores)");

  PackArgs pack;
  auto* c_pack = app.add_subcommand("pack", "Pack a depth dataset into an 8-bit YUV stream");
  c_pack->add_option("--manifest", pack.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c_pack->add_option("--scheme", pack.scheme, "VBP or RP")->check(CLI::IsMember({"VBP", "RP", "vbp", "rp"}));
  c_pack->add_option("--param", pack.param, "Bits (VBP, default 16) or period (RP, default 2048)");
  c_pack->add_option("--chroma", pack.chroma, "444 or 420");
  c_pack->add_option("--out", pack.out, "Output .y4m (or directory with --planes)")->required()->check(kOutputPath);
  c_pack->add_flag("--planes", pack.planes, "Write raw per-frame plane files instead of Y4M");

  UnpackArgs unpack;
  auto* c_unpack = app.add_subcommand("unpack", "Unpack a YUV stream back into depth maps");
  c_unpack->add_option("--input", unpack.input, "Y4M file or plane directory")->required()->check(CLI::ExistingPath);
  c_unpack->add_option("--scheme", unpack.scheme, "VBP or RP")->check(CLI::IsMember({"VBP", "RP", "vbp", "rp"}));
  c_unpack->add_option("--param", unpack.param, "Bits (VBP) or period (RP)");
  c_unpack->add_option("--out", unpack.out, "Output manifest")->required()->check(kOutputPath);
  c_unpack->add_option("--format", unpack.format, "pfm, pgm16 or rawf32");
  c_unpack->add_option("--reference", unpack.reference, "Ground-truth manifest; prints the MAE")->check(CLI::ExistingFile);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Error over packing configs x bitrates x chroma modes");
  c_sweep->add_option("--manifest", sweep.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--vbp", sweep.vbp_bits, "VBP precisions, e.g. 8,12,16 (with --rp unset too: VBP 8..24 and RP 512..8192)")->delimiter(',');
  c_sweep->add_option("--rp", sweep.rp_periods, "RP periods, e.g. 512,2048")->delimiter(',');
  c_sweep->add_option("--bitrates", sweep.bitrates, "Target bitrates in bit/s")->required()->delimiter(',');
  c_sweep->add_option("--chroma", sweep.chroma, "Chroma modes, e.g. 444,420")->delimiter(',');
  c_sweep->add_flag("--scene", sweep.scene, "Add the view-space MAE column");
  c_sweep->add_option("--out", sweep.out, "Output CSV")->required()->check(kOutputPath);
  add_channel_flags(c_sweep, sweep.channel);

  OracleArgs orc;
  auto* c_oracle = app.add_subcommand("oracle", "Per-frame error of every VBP precision");
  c_oracle->add_option("--manifest", orc.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c_oracle->add_option("--bitrates", orc.bitrates, "Target bitrates in bit/s")->required()->delimiter(',');
  c_oracle->add_option("--precisions", orc.precisions, "Precision set (default 8,10,...,20,24)")->delimiter(',');
  c_oracle->add_option("--chroma", orc.chroma, "444 or 420");
  c_oracle->add_option("--out", orc.out, "Output labels CSV")->required()->check(kOutputPath);
  add_channel_flags(c_oracle, orc.channel);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the precision predictor on oracle labels");
  c_train->add_option("--manifest", tr.manifests, "Dataset manifest (repeat per dataset)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--labels", tr.labels, "Labels CSV of the matching manifest")->required()->check(CLI::ExistingFile);
  c_train->add_option("--model", tr.model, "Output model file")->required()->check(kOutputPath);
  c_train->add_option("--loss-log", tr.loss_log, "Per-epoch loss CSV")->check(kOutputPath);
  c_train->add_option("--epochs", tr.params.epochs)->check(CLI::NonNegativeNumber);
  c_train->add_option("--batch", tr.params.batch_size)->check(CLI::PositiveNumber);
  c_train->add_option("--lr", tr.params.learning_rate)->check(CLI::PositiveNumber);
  c_train->add_option("--lr-step", tr.params.lr_step_epochs, "Decay the rate every N epochs (0: never)");
  c_train->add_option("--lr-gamma", tr.params.lr_gamma);
  c_train->add_option("--hidden", tr.params.hidden)->check(CLI::PositiveNumber);
  c_train->add_option("--test-fraction", tr.params.test_fraction)->check(CLI::Range(0.0, 0.95));
  c_train->add_option("--split", tr.split, "temporal or random");
  c_train->add_option("--seed", tr.params.seed);
  c_train->add_flag("--balance,!--no-balance", tr.balance, "Subsample every dataset to the smallest one (default on)");

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Predicted error per precision for every frame");
  c_predict->add_option("--model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--manifest", pr.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--bitrates", pr.bitrates, "Target bitrates in bit/s")->required()->delimiter(',');
  c_predict->add_option("--out", pr.out, "Output CSV")->required()->check(kOutputPath);

  SelectArgs sel;
  auto* c_select = app.add_subcommand("select", "Compare model choices with the oracle and a baseline");
  c_select->add_option("--model", sel.model, "Model file")->required()->check(CLI::ExistingFile);
  c_select->add_option("--manifest", sel.manifests, "Dataset manifest (repeat per dataset)")->required()->check(CLI::ExistingFile);
  c_select->add_option("--labels", sel.labels, "Labels CSV of the matching manifest")->required()->check(CLI::ExistingFile);
  c_select->add_option("--holdout", sel.holdout, "Evaluate only the last fraction of frames")->check(CLI::Range(0.0, 1.0));
  c_select->add_option("--baseline", sel.baseline, "default (12/14 bits at 50 Mbps) or fitted");
  c_select->add_option("--out", sel.out, "Output CSV")->required()->check(kOutputPath);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Single-map feature extraction and inference latency");
  c_bench->add_option("--model", bench.model, "Model file (default: untrained network)")->check(CLI::ExistingFile);
  c_bench->add_option("--iters", bench.iters)->check(CLI::PositiveNumber);
  c_bench->add_option("--size", bench.size, "Map width and height")->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed);

  SynthArgs syn;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic depth dataset");
  c_synth->add_option("--kind", syn.kind, "ramp, orbit, flythrough, noise or mixed");
  c_synth->add_option("--frames", syn.options.frames)->check(CLI::PositiveNumber);
  c_synth->add_option("--width", syn.options.width)->check(CLI::PositiveNumber);
  c_synth->add_option("--height", syn.options.height)->check(CLI::PositiveNumber);
  c_synth->add_option("--fps", syn.options.fps)->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", syn.options.seed);
  c_synth->add_option("--orbit-speed", syn.options.orbit_speed, "rad/s");
  c_synth->add_option("--fly-speed", syn.options.fly_speed, "units/s");
  c_synth->add_option("--spheres", syn.options.spheres)->check(CLI::NonNegativeNumber);
  c_synth->add_option("--near", syn.near_plane);
  c_synth->add_option("--far", syn.far_plane);
  c_synth->add_option("--format", syn.format, "pfm, pgm16 or rawf32");
  c_synth->add_option("--out", syn.out, "Output manifest")->required()->check(kOutputPath);

  EncodeArgs enc;
  auto* c_encode = app.add_subcommand("encode", "Code a Y4M stream and dump per-frame sizes");
  c_encode->add_option("--input", enc.input, "Input .y4m")->required()->check(CLI::ExistingFile);
  c_encode->add_option("--bitrate", enc.bitrate, "Target bit/s")->check(CLI::PositiveNumber);
  c_encode->add_option("--sizes", enc.sizes, "Size CSV (frame_index,type,qp,bits)")->check(kOutputPath);
  c_encode->add_option("--recon", enc.recon, "Reconstructed .y4m")->check(kOutputPath);
  c_encode->add_option("--encoder-cmd", enc.encoder_cmd, "External encoder command (Y4M on stdin)");
  c_encode->add_option("--decoder-cmd", enc.decoder_cmd, "External decoder command (Y4M on stdout)");
  add_channel_flags(c_encode, enc.channel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_pack) return cmd_pack(pack);
    if (*c_unpack) return cmd_unpack(unpack);
    if (*c_sweep) return cmd_sweep(sweep, workers);
    if (*c_oracle) return cmd_oracle(orc, workers);
    if (*c_train) return cmd_train(tr);
    if (*c_predict) return cmd_predict(pr);
    if (*c_select) return cmd_select(sel);
    if (*c_bench) return cmd_bench(bench);
    if (*c_synth) return cmd_synth(syn, workers);
    if (*c_encode) return cmd_encode(enc);
  } catch (const ConfigError& e) {
    std::cerr << "depthpack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const VersionError& e) {
    std::cerr << "depthpack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "depthpack: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "depthpack: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "depthpack: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
