#include "depthpack/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

namespace depthpack::predictor {

namespace {

DenseLayer make_layer(int inputs, int outputs, std::mt19937_64& rng) {
  DenseLayer layer;
  layer.inputs = inputs;
  layer.outputs = outputs;
  layer.weights.resize(static_cast<std::size_t>(inputs) * outputs);
  layer.bias.assign(static_cast<std::size_t>(outputs), 0.0);
  const double limit = std::sqrt(6.0 / inputs);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : layer.weights) w = dist(rng);
  return layer;
}

DenseLayer zeros_like(const DenseLayer& layer) {
  DenseLayer out = layer;
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  std::fill(out.bias.begin(), out.bias.end(), 0.0);
  return out;
}

// Affine step: out = W in + b.
void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.assign(layer.bias.begin(), layer.bias.end());
  for (int o = 0; o < layer.outputs; ++o) {
    const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
    double acc = out[o];
    for (int i = 0; i < layer.inputs; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

}  // namespace

RegressorModel RegressorModel::create(std::vector<int> precisions, int hidden,
                                      std::uint64_t seed) {
  if (precisions.empty()) throw ConfigError("model needs at least one output precision");
  if (hidden <= 0) throw ConfigError("hidden width must be positive");
  std::mt19937_64 rng(seed);
  RegressorModel model;
  model.precisions = std::move(precisions);
  model.feature_mean.assign(kFeatureDim, 0.0);
  model.feature_std.assign(kFeatureDim, 1.0);
  const int in = static_cast<int>(kFeatureDim);
  const int out = static_cast<int>(model.precisions.size());
  model.layers.push_back(make_layer(in, hidden, rng));
  model.layers.push_back(make_layer(hidden, hidden, rng));
  model.layers.push_back(make_layer(hidden, out, rng));
  return model;
}

std::size_t RegressorModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void RegressorModel::validate() const {
  if (layers.empty()) throw DataError("model has no layers");
  if (output_dim() != precisions.size()) {
    throw DataError("model output dimension differs from its precision set");
  }
  if (feature_mean.size() != input_dim() || feature_std.size() != input_dim()) {
    throw DataError("feature normalization does not match the input dimension");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weights.size() != static_cast<std::size_t>(l.inputs) * l.outputs ||
        l.bias.size() != static_cast<std::size_t>(l.outputs)) {
      throw DataError("layer parameter arrays do not match the layer shape");
    }
    if (i > 0 && l.inputs != layers[i - 1].outputs) throw DataError("layer shapes do not chain");
    for (double w : l.weights) {
      if (!std::isfinite(w)) throw DataError("model has non-finite weights");
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) throw DataError("model has non-finite biases");
    }
  }
  for (std::size_t i = 0; i < feature_std.size(); ++i) {
    if (!std::isfinite(feature_mean[i]) || !(feature_std[i] > 0.0)) {
      throw DataError("model has invalid feature normalization");
    }
  }
}

std::vector<double> normalize_features(const RegressorModel& model, const FeatureVector& x) {
  const auto raw = x.to_array();
  if (model.input_dim() != raw.size()) throw DimensionError("feature dimension mismatch");
  std::vector<double> z(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    z[i] = (raw[i] - model.feature_mean[i]) / model.feature_std[i];
  }
  return z;
}

std::vector<double> forward_normalized(const RegressorModel& model, std::span<const double> z) {
  if (z.size() != model.input_dim()) throw DimensionError("feature dimension mismatch");
  std::vector<double> current(z.begin(), z.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    affine(model.layers[l], current, next);
    if (l + 1 < model.layers.size()) {
      for (double& v : next) v = std::max(0.0, v);
    }
    current.swap(next);
  }
  return current;
}

std::vector<double> forward(const RegressorModel& model, const FeatureVector& x) {
  const std::vector<double> z = normalize_features(model, x);
  std::vector<double> out = forward_normalized(model, z);
  if (model.label_transform == LabelTransform::Log) {
    for (double& v : out) v = std::exp(v);
  }
  return out;
}

double transform_label(LabelTransform transform, double error) {
  if (transform == LabelTransform::Identity) return error;
  return std::log(std::max(error, kLogLabelFloor));
}

int select_precision(std::span<const double> predicted, std::span<const int> precisions) {
  if (predicted.empty() || predicted.size() != precisions.size()) {
    throw DimensionError("prediction and precision lists differ in length");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < predicted.size(); ++i) {
    if (predicted[i] < predicted[best] ||
        (predicted[i] == predicted[best] && precisions[i] < precisions[best])) {
      best = i;
    }
  }
  return precisions[best];
}

int select_precision(const RegressorModel& model, const FeatureVector& x) {
  const std::vector<double> out = forward(model, x);
  return select_precision(out, model.precisions);
}

double l1_loss(const RegressorModel& model, std::span<const std::vector<double>> inputs,
               std::span<const std::vector<double>> targets, std::vector<DenseLayer>* grad) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw DimensionError("inputs and targets must be non-empty and equally long");
  }
  const std::size_t depth = model.layers.size();
  const double outputs = static_cast<double>(model.output_dim());
  const double scale = 1.0 / (static_cast<double>(inputs.size()) * outputs);
  if (grad != nullptr) {
    grad->clear();
    for (const DenseLayer& l : model.layers) grad->push_back(zeros_like(l));
  }

  std::vector<std::vector<double>> acts(depth + 1);  // acts[0] = input, then post-activation
  std::vector<std::vector<double>> pre(depth);
  std::vector<double> delta, back;
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].size() != model.input_dim() || targets[s].size() != model.output_dim()) {
      throw DimensionError("sample dimension mismatch");
    }
    acts[0] = inputs[s];
    for (std::size_t l = 0; l < depth; ++l) {
      affine(model.layers[l], acts[l], pre[l]);
      acts[l + 1] = pre[l];
      if (l + 1 < depth) {
        for (double& v : acts[l + 1]) v = std::max(0.0, v);
      }
    }
    const std::vector<double>& out = acts[depth];
    delta.assign(out.size(), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double r = out[k] - targets[s][k];
      loss += std::abs(r);
      delta[k] = r > 0.0 ? scale : (r < 0.0 ? -scale : 0.0);
    }
    if (grad == nullptr) continue;
    for (std::size_t l = depth; l-- > 0;) {
      const DenseLayer& layer = model.layers[l];
      DenseLayer& g = (*grad)[l];
      const std::vector<double>& in = acts[l];
      for (int o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        double* grow = g.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
        for (int i = 0; i < layer.inputs; ++i) grow[i] += d * in[i];
      }
      if (l == 0) break;
      back.assign(static_cast<std::size_t>(layer.inputs), 0.0);
      for (int o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
        for (int i = 0; i < layer.inputs; ++i) back[i] += row[i] * d;
      }
      for (int i = 0; i < layer.inputs; ++i) {
        if (!(pre[l - 1][i] > 0.0)) back[i] = 0.0;
      }
      delta.swap(back);
    }
  }
  return loss * scale;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_dataset(
    std::span<const Sample> samples, const TrainParams& params) {
  if (!(params.test_fraction >= 0.0 && params.test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in [0, 1)");
  }
  std::vector<std::size_t> train_idx, test_idx;
  if (params.split == SplitMode::Random) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(params.seed ^ 0x5eedf00dULL);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test =
        static_cast<std::size_t>(std::floor(params.test_fraction * samples.size() + 0.5));
    test_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  } else {
    std::map<int, std::set<std::int64_t>> frames;
    for (const Sample& s : samples) frames[s.group].insert(s.frame_index);
    std::map<int, std::int64_t> first_test;
    for (const auto& [group, idx] : frames) {
      const auto keep = static_cast<std::size_t>(
          std::floor((1.0 - params.test_fraction) * static_cast<double>(idx.size()) + 0.5));
      auto it = idx.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(std::min(keep, idx.size())));
      first_test[group] = it == idx.end() ? *idx.rbegin() + 1 : *it;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      (samples[i].frame_index >= first_test[samples[i].group] ? test_idx : train_idx).push_back(i);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (train_idx.empty()) throw ConfigError("training split is empty");
  return {train_idx, test_idx};
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  long long step = 0;
};

void adam_update(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grad,
                 AdamState& state, const TrainParams& p, double lr) {
  ++state.step;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
      v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + p.epsilon);
    }
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weights, grad[l].weights, state.m[l].weights, state.v[l].weights);
    update(params[l].bias, grad[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

// Output layer absorbs y = scale * y_norm + offset.
RegressorModel fold_label_scale(RegressorModel model, double offset, double scale) {
  DenseLayer& last = model.layers.back();
  for (double& w : last.weights) w *= scale;
  for (double& b : last.bias) b = b * scale + offset;
  return model;
}

bool all_finite(const std::vector<DenseLayer>& layers) {
  for (const DenseLayer& l : layers) {
    for (double w : l.weights) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

}  // namespace

TrainResult train(std::span<const Sample> samples, std::vector<int> precisions,
                  const TrainParams& params) {
  if (samples.empty()) throw ConfigError("training set is empty");
  if (params.epochs < 0 || params.batch_size <= 0) throw ConfigError("bad epoch/batch settings");
  for (const Sample& s : samples) {
    if (s.errors.size() != precisions.size()) {
      throw DimensionError("sample label count differs from the precision set");
    }
    for (double e : s.errors) {
      if (!std::isfinite(e)) throw DataError("non-finite training label");
    }
  }

  TrainResult result;
  std::tie(result.train_indices, result.test_indices) = split_dataset(samples, params);
  const auto& train_idx = result.train_indices;
  const auto& test_idx = result.test_indices;

  RegressorModel model = RegressorModel::create(precisions, params.hidden, params.seed);
  model.label_transform = params.label_transform;
  auto label = [&](double e) { return transform_label(params.label_transform, e); };
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    double mean = 0.0;
    for (std::size_t i : train_idx) mean += samples[i].features.to_array()[d];
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (std::size_t i : train_idx) {
      const double diff = samples[i].features.to_array()[d] - mean;
      var += diff * diff;
    }
    const double sd = std::sqrt(var / static_cast<double>(train_idx.size()));
    model.feature_mean[d] = mean;
    model.feature_std[d] = sd > 1e-12 ? sd : 1.0;
  }

  double label_mean = 0.0;
  double label_count = 0.0;
  for (std::size_t i : train_idx) {
    for (double e : samples[i].errors) {
      label_mean += label(e);
      label_count += 1.0;
    }
  }
  label_mean /= label_count;
  double label_var = 0.0;
  for (std::size_t i : train_idx) {
    for (double e : samples[i].errors) label_var += (label(e) - label_mean) * (label(e) - label_mean);
  }
  double label_scale = std::sqrt(label_var / label_count);
  if (!(label_scale > 1e-300)) label_scale = 1.0;

  std::vector<std::vector<double>> inputs(samples.size());
  std::vector<std::vector<double>> targets(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    inputs[i] = normalize_features(model, samples[i].features);
    targets[i].resize(precisions.size());
    for (std::size_t k = 0; k < precisions.size(); ++k) {
      targets[i][k] = (label(samples[i].errors[k]) - label_mean) / label_scale;
    }
  }
  auto subset_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> in, tg;
    for (std::size_t i : idx) {
      in.push_back(inputs[i]);
      tg.push_back(targets[i]);
    }
    return l1_loss(model, in, tg) * label_scale;
  };

  AdamState adam;
  for (const DenseLayer& l : model.layers) {
    adam.m.push_back(zeros_like(l));
    adam.v.push_back(zeros_like(l));
  }
  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> order = train_idx;
  RegressorModel checkpoint = model;
  std::vector<DenseLayer> grad;
  std::vector<std::vector<double>> batch_in, batch_tg;
  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    double lr = params.learning_rate;
    if (params.lr_step_epochs > 0) {
      lr *= std::pow(params.lr_gamma, static_cast<double>((epoch - 1) / params.lr_step_epochs));
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(params.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(params.batch_size));
      batch_in.clear();
      batch_tg.clear();
      for (std::size_t j = start; j < end; ++j) {
        batch_in.push_back(inputs[order[j]]);
        batch_tg.push_back(targets[order[j]]);
      }
      const double loss = l1_loss(model, batch_in, batch_tg, &grad);
      if (!std::isfinite(loss) || !all_finite(grad)) {
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch),
                              fold_label_scale(checkpoint, label_mean, label_scale));
      }
      adam_update(model.layers, grad, adam, params, lr);
      if (!all_finite(model.layers)) {
        throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch),
                              fold_label_scale(checkpoint, label_mean, label_scale));
      }
    }
    checkpoint = model;
    result.history.push_back({epoch, subset_loss(train_idx), subset_loss(test_idx)});
  }
  result.model = fold_label_scale(std::move(model), label_mean, label_scale);
  return result;
}

std::vector<Sample> balance_groups(std::span<const Sample> samples, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].group].push_back(i);
  if (groups.empty()) return {};
  std::size_t smallest = samples.size();
  for (const auto& [g, idx] : groups) smallest = std::min(smallest, idx.size());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [g, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Sample> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(samples[i]);
  return out;
}

int BaselinePolicy::operator()(double bitrate) const {
  for (const Tier& t : tiers) {
    if (bitrate < t.below_bps) return t.bits;
  }
  return otherwise_bits;
}

BaselinePolicy BaselinePolicy::fit(std::span<const oracle::OracleRecord> records) {
  if (records.empty()) throw ConfigError("cannot fit a baseline without records");
  const std::vector<int>& precisions = records.front().precisions;
  std::map<double, std::vector<double>> sums;
  std::map<double, int> counts;
  for (const oracle::OracleRecord& r : records) {
    if (r.precisions != precisions) throw DataError("records disagree on the precision set");
    auto& s = sums[r.bitrate];
    s.resize(precisions.size(), 0.0);
    for (std::size_t k = 0; k < precisions.size(); ++k) s[k] += r.errors_by_precision[k];
    ++counts[r.bitrate];
  }
  std::vector<std::pair<double, int>> best;
  for (const auto& [bitrate, s] : sums) {
    best.emplace_back(bitrate, precisions[oracle::argmin_index(s)]);
  }
  BaselinePolicy policy;
  policy.tiers.clear();
  for (std::size_t i = 0; i + 1 < best.size(); ++i) {
    policy.tiers.push_back({std::sqrt(best[i].first * best[i + 1].first), best[i].second});
  }
  policy.otherwise_bits = best.back().second;
  return policy;
}

int baseline_policy(double bitrate) { return BaselinePolicy{}(bitrate); }

SelectionReport evaluate_choices(std::span<const oracle::OracleRecord> records,
                                 std::span<const int> chosen) {
  if (records.size() != chosen.size()) throw DimensionError("one choice per record expected");
  SelectionReport report;
  report.count = records.size();
  if (records.empty()) return report;
  std::size_t optimal = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const oracle::OracleRecord& r = records[i];
    auto it = std::find(r.precisions.begin(), r.precisions.end(), chosen[i]);
    if (it == r.precisions.end()) {
      throw ConfigError("choice " + std::to_string(chosen[i]) + " is not in the precision set");
    }
    const double err = r.errors_by_precision[static_cast<std::size_t>(it - r.precisions.begin())];
    const double best = *std::min_element(r.errors_by_precision.begin(), r.errors_by_precision.end());
    optimal += err == best;
    report.mean_error += err;
    report.oracle_error += best;
  }
  const double n = static_cast<double>(records.size());
  report.fraction_optimal = static_cast<double>(optimal) / n;
  report.mean_error /= n;
  report.oracle_error /= n;
  return report;
}

namespace {

constexpr const char* kModelFormat = "depthpack-regressor";

}  // namespace

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
  model.validate();
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["feature_version"] = model.feature_version;
  j["feature_names"] = FeatureVector::names();
  j["precisions"] = model.precisions;
  j["feature_mean"] = model.feature_mean;
  j["feature_std"] = model.feature_std;
  j["activation"] = "relu";
  j["label_transform"] = model.label_transform == LabelTransform::Log ? "log" : "identity";
  for (const DenseLayer& l : model.layers) {
    j["layers"].push_back({{"inputs", l.inputs},
                           {"outputs", l.outputs},
                           {"weights", l.weights},
                           {"bias", l.bias}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file: " + std::string(e.what()));
  }
  if (!j.is_object() || j.value("format", "") != kModelFormat) {
    throw VersionError("not a depthpack model file: " + path.string());
  }
  if (j.value("version", -1) != kModelFormatVersion) {
    throw VersionError("unsupported model file version " + j.value("version", nlohmann::json()).dump());
  }
  if (j.value("feature_version", -1) != kFeatureVersion) {
    throw VersionError("model expects feature version " +
                       j.value("feature_version", nlohmann::json()).dump() + ", this build has " +
                       std::to_string(kFeatureVersion));
  }
  RegressorModel model;
  try {
    model.feature_version = j.at("feature_version").get<int>();
    const std::string transform = j.value("label_transform", "identity");
    if (transform == "log") {
      model.label_transform = LabelTransform::Log;
    } else if (transform != "identity") {
      throw VersionError("unknown label transform '" + transform + "'");
    }
    model.precisions = j.at("precisions").get<std::vector<int>>();
    model.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    model.feature_std = j.at("feature_std").get<std::vector<double>>();
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      l.inputs = lj.at("inputs").get<int>();
      l.outputs = lj.at("outputs").get<int>();
      l.weights = lj.at("weights").get<std::vector<double>>();
      l.bias = lj.at("bias").get<std::vector<double>>();
      model.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file: " + std::string(e.what()));
  }
  model.validate();
  if (model.input_dim() != kFeatureDim) throw VersionError("model input dimension mismatch");
  return model;
}

}  // namespace depthpack::predictor
