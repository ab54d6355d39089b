#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "doctest.h"
#include "depthpack/predictor.hpp"

using namespace depthpack;
using namespace depthpack::predictor;

namespace {

FeatureVector random_features(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, kFeatureDim> a;
  for (double& v : a) v = u(rng);
  return FeatureVector::from_array(a);
}

// Direct triple loop, written independently of the library's affine().
std::vector<double> naive_forward(const RegressorModel& m, std::vector<double> x) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const DenseLayer& layer = m.layers[l];
    std::vector<double> y(layer.outputs);
    for (int o = 0; o < layer.outputs; ++o) {
      double acc = layer.bias[o];
      for (int i = 0; i < layer.inputs; ++i) acc += layer.weights[o * layer.inputs + i] * x[i];
      y[o] = l + 1 < m.layers.size() ? std::max(0.0, acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

std::vector<Sample> affine_dataset(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Sample s;
    // only mean_depth varies
    s.features.mean_depth = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.features.log2_bitrate = 20.0;
    s.errors = {0.5 * s.features.mean_depth + 0.1, 0.4 - 0.2 * s.features.mean_depth};
    s.frame_index = i;
    out.push_back(s);
  }
  return out;
}

double mean_abs_deviation(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double mad = 0;
  for (double x : v) mad += std::abs(x - mean);
  return mad / v.size();
}

oracle::OracleRecord record(double bitrate, std::vector<double> errors) {
  oracle::OracleRecord r;
  r.bitrate = bitrate;
  r.precisions = {8, 12, 16};
  r.errors_by_precision = std::move(errors);
  oracle::settle(r);
  return r;
}

}  // namespace

TEST_CASE("forward matches a naive implementation") {
  std::mt19937_64 rng(1);
  for (int hidden : {1, 7, 64}) {
    auto m = RegressorModel::create({8, 12, 16, 24}, hidden, 9 + hidden);
    for (auto& layer : m.layers) {
      for (double& b : layer.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    }
    CHECK(m.parameter_count() ==
          static_cast<std::size_t>(24 * hidden + hidden + hidden * hidden + hidden + hidden * 4 + 4));
    for (int t = 0; t < 50; ++t) {
      const auto f = random_features(rng);
      const auto z = normalize_features(m, f);
      const auto got = forward_normalized(m, z);
      const auto want = naive_forward(m, z);
      REQUIRE(got.size() == 4);
      for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-10);
    }
  }
}

TEST_CASE("zero weights give the output biases") {
  auto m = RegressorModel::create({8, 16}, 5, 3);
  for (auto& layer : m.layers) std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
  m.layers.back().bias = {0.25, -1.5};
  std::mt19937_64 rng(2);
  const auto out = forward_normalized(m, normalize_features(m, random_features(rng)));
  CHECK(out[0] == 0.25);
  CHECK(out[1] == -1.5);
  m.label_transform = LabelTransform::Log;
  const auto mapped = forward(m, random_features(rng));
  CHECK(mapped[0] == doctest::Approx(std::exp(0.25)));
}

TEST_CASE("single path through the network") {
  auto m = RegressorModel::create({8}, 2, 3);
  for (auto& layer : m.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  m.layers[0].weight(0, 0) = 1.0;
  m.layers[1].weight(0, 0) = 2.0;
  m.layers[2].weight(0, 0) = 3.0;
  m.layers[2].bias[0] = 1.0;
  const std::vector<double> pos(kFeatureDim, 0.5), neg(kFeatureDim, -0.5);
  CHECK(forward_normalized(m, pos)[0] == doctest::Approx(4.0));
  CHECK(forward_normalized(m, neg)[0] == doctest::Approx(1.0));
}

TEST_CASE("normalization uses the stored moments") {
  auto m = RegressorModel::create({8}, 4, 1);
  m.feature_mean.assign(kFeatureDim, 0.5);
  m.feature_std.assign(kFeatureDim, 0.25);
  FeatureVector f;
  f.mean_depth = 1.0;
  const auto z = normalize_features(m, f);
  CHECK(z[0] == doctest::Approx(2.0));
  CHECK(z[1] == doctest::Approx(-2.0));
}

TEST_CASE("l1 gradient matches central differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto model = RegressorModel::create({8, 12, 16}, 16, 5);
  for (auto& layer : model.layers) {
    for (double& b : layer.bias) b = 0.1 * gauss(rng);
  }
  std::vector<std::vector<double>> inputs, targets;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> z(kFeatureDim), t(3);
    for (double& v : z) v = gauss(rng);
    for (double& v : t) v = 3.0 * gauss(rng);
    inputs.push_back(z);
    targets.push_back(t);
  }
  std::vector<DenseLayer> grad;
  l1_loss(model, inputs, targets, &grad);
  REQUIRE(grad.size() == model.layers.size());

  const double h = 1e-6;
  int checked = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t l = rng() % model.layers.size();
    const bool is_bias = rng() % 4 == 0;
    auto& params = is_bias ? model.layers[l].bias : model.layers[l].weights;
    const std::size_t k = rng() % params.size();
    const double analytic = is_bias ? grad[l].bias[k] : grad[l].weights[k];
    const double saved = params[k];
    params[k] = saved + h;
    const double up = l1_loss(model, inputs, targets);
    params[k] = saved - h;
    const double down = l1_loss(model, inputs, targets);
    params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    CHECK(std::abs(analytic - numeric) / scale < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("learns an affine map") {
  const auto data = affine_dataset(400, 6);
  TrainParams p;
  p.label_transform = LabelTransform::Identity;
  p.split = SplitMode::Random;
  p.epochs = 300;
  p.lr_step_epochs = 100;
  p.lr_gamma = 0.3;
  const auto result = train(data, {8, 16}, p);
  CHECK(result.history.size() == 300);
  CHECK(result.history.back().test_l1 < 1e-3);
  double err = 0;
  for (std::size_t i : result.test_indices) {
    const auto pred = forward(result.model, data[i].features);
    err += std::abs(pred[0] - data[i].errors[0]) + std::abs(pred[1] - data[i].errors[1]);
  }
  err /= 2.0 * result.test_indices.size();
  MESSAGE("affine test L1 " << err);
  CHECK(err < 1e-3);
}

TEST_CASE("memorizes a single sample") {
  std::mt19937_64 rng(7);
  Sample s;
  s.features = random_features(rng);
  s.errors = {0.004, 0.002, 0.003};
  TrainParams p;
  p.test_fraction = 0.0;
  p.epochs = 500;
  p.batch_size = 1;
  const auto result = train(std::vector<Sample>{s}, {8, 12, 16}, p);
  const auto pred = forward(result.model, s.features);
  for (int k = 0; k < 3; ++k) CHECK(pred[k] == doctest::Approx(s.errors[k]).epsilon(1e-3));
  CHECK(select_precision(result.model, s.features) == 12);
  CHECK(std::isnan(result.history.back().test_l1));
}

TEST_CASE("shuffled labels do not generalize") {
  auto data = affine_dataset(300, 8);
  std::mt19937_64 rng(9);
  std::vector<std::vector<double>> labels;
  for (const auto& s : data) labels.push_back(s.errors);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].errors = labels[i];
  TrainParams p;
  p.label_transform = LabelTransform::Identity;
  p.split = SplitMode::Random;
  p.epochs = 100;
  const auto result = train(data, {8, 16}, p);
  std::vector<double> test_labels;
  double err = 0;
  for (std::size_t i : result.test_indices) {
    const auto pred = forward(result.model, data[i].features);
    for (int k = 0; k < 2; ++k) {
      test_labels.push_back(data[i].errors[k]);
      err += std::abs(pred[k] - data[i].errors[k]);
    }
  }
  err /= test_labels.size();
  MESSAGE("shuffled test L1 " << err << " label MAD " << mean_abs_deviation(test_labels));
  CHECK(err > 0.8 * mean_abs_deviation(test_labels));
}

TEST_CASE("training is reproducible for a seed") {
  const auto data = affine_dataset(60, 10);
  TrainParams p;
  p.epochs = 5;
  const auto a = train(data, {8, 16}, p);
  const auto b = train(data, {8, 16}, p);
  CHECK(a.model.layers[1].weights == b.model.layers[1].weights);
  CHECK(a.history.back().train_l1 == b.history.back().train_l1);
  p.seed = 2;
  const auto c = train(data, {8, 16}, p);
  CHECK(a.model.layers[1].weights != c.model.layers[1].weights);
}

TEST_CASE("training input errors") {
  auto data = affine_dataset(10, 11);
  TrainParams p;
  CHECK_THROWS_AS(train({}, {8, 16}, p), ConfigError);
  CHECK_THROWS_AS(train(data, {8}, p), DimensionError);
  data[3].errors[0] = NAN;
  CHECK_THROWS_AS(train(data, {8, 16}, p), DataError);
  p.test_fraction = 1.0;
  CHECK_THROWS_AS(split_dataset(data, p), ConfigError);
}

TEST_CASE("diverging training reports a checkpoint") {
  const auto data = affine_dataset(50, 12);
  TrainParams p;
  p.label_transform = LabelTransform::Identity;
  p.learning_rate = 1e300;
  p.epochs = 20;
  try {
    train(data, {8, 16}, p);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.checkpoint().layers.size() == 3);
  }
}

TEST_CASE("temporal split holds out the last frames of each group") {
  std::vector<Sample> data;
  for (int g = 0; g < 2; ++g) {
    for (int f = 0; f < 10; ++f) {
      Sample s;
      s.group = g;
      s.frame_index = f;
      s.errors = {1.0};
      // two bitrates per frame share the frame index
      data.push_back(s);
      data.push_back(s);
    }
  }
  TrainParams p;
  const auto [train_idx, test_idx] = split_dataset(data, p);
  CHECK(test_idx.size() == 8);
  for (std::size_t i : test_idx) CHECK(data[i].frame_index >= 8);
  for (std::size_t i : train_idx) CHECK(data[i].frame_index < 8);

  p.split = SplitMode::Random;
  const auto [a, b] = split_dataset(data, p);
  CHECK(b.size() == 8);
  CHECK(a.size() == 32);
}

TEST_CASE("balance keeps the smallest group size per group") {
  std::vector<Sample> data;
  for (int i = 0; i < 10; ++i) {
    Sample s;
    s.group = i < 7 ? 0 : 1;
    s.frame_index = i;
    data.push_back(s);
  }
  const auto out = balance_groups(data, 1);
  REQUIRE(out.size() == 6);
  int g0 = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    g0 += out[i].group == 0;
    if (i > 0) CHECK(out[i].frame_index > out[i - 1].frame_index);
  }
  CHECK(g0 == 3);
}

TEST_CASE("selection ties go to the lowest precision") {
  const std::vector<int> precisions{8, 12, 16};
  CHECK(select_precision(std::vector<double>{0.3, 0.1, 0.2}, precisions) == 12);
  CHECK(select_precision(std::vector<double>{0.1, 0.1, 0.1}, precisions) == 8);
  CHECK(select_precision(std::vector<double>{0.3, 0.2, 0.2}, precisions) == 12);
}

TEST_CASE("selection is invariant under increasing transforms") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<int> precisions{8, 10, 12, 14, 16};
  for (int t = 0; t < 200; ++t) {
    std::vector<double> out(5), a(5), b(5);
    for (double& v : out) v = u(rng);
    for (int k = 0; k < 5; ++k) {
      a[k] = std::exp(out[k]);
      b[k] = 2.5 * out[k] * out[k] * out[k] + 7.0;
    }
    const int want = select_precision(out, precisions);
    CHECK(select_precision(a, precisions) == want);
    CHECK(select_precision(b, precisions) == want);
  }
}

TEST_CASE("forward rejects a wrong input size") {
  const auto m = RegressorModel::create({8, 16}, 4, 1);
  CHECK_THROWS_AS(forward_normalized(m, std::vector<double>(kFeatureDim - 1)), DimensionError);
}

TEST_CASE("baseline policy tiers") {
  CHECK(baseline_policy(10e6) == 12);
  CHECK(baseline_policy(50e6) == 14);
  CHECK(baseline_policy(100e6) == 14);
  std::vector<oracle::OracleRecord> records{record(1e6, {0.1, 0.2, 0.3}), record(1e6, {0.1, 0.05, 0.3}),
                                            record(1e8, {0.3, 0.2, 0.1})};
  const auto fitted = BaselinePolicy::fit(records);
  // mean errors at 1e6: 0.1, 0.125, 0.3
  CHECK(fitted(1e6) == 8);
  CHECK(fitted(9.9e6) == 8);
  CHECK(fitted(1.01e7) == 16);
  CHECK(fitted(1e8) == 16);
}

TEST_CASE("evaluate choices") {
  std::vector<oracle::OracleRecord> records{record(1e6, {0.1, 0.2, 0.3}), record(1e6, {0.3, 0.05, 0.3})};
  const auto r = evaluate_choices(records, std::vector<int>{8, 16});
  CHECK(r.count == 2);
  CHECK(r.fraction_optimal == 0.5);
  CHECK(r.mean_error == doctest::Approx(0.2));
  CHECK(r.oracle_error == doctest::Approx(0.075));
  CHECK_THROWS_AS(evaluate_choices(records, std::vector<int>{8, 10}), ConfigError);
  CHECK_THROWS_AS(evaluate_choices(records, std::vector<int>{8}), DimensionError);
}

TEST_CASE("model file round trip and version checks") {
  const auto data = affine_dataset(40, 13);
  TrainParams p;
  p.epochs = 3;
  const auto model = train(data, {8, 16}, p).model;
  const auto path = std::filesystem::temp_directory_path() / "depthpack_test_model.json";
  save_model(path, model);
  const auto back = load_model(path);
  CHECK(back.precisions == model.precisions);
  CHECK(back.label_transform == LabelTransform::Log);
  CHECK(back.feature_mean == model.feature_mean);
  CHECK(back.layers[2].weights == model.layers[2].weights);
  std::mt19937_64 rng(14);
  const auto f = random_features(rng);
  CHECK(forward(back, f) == forward(model, f));

  nlohmann::json j;
  std::ifstream(path) >> j;
  j["version"] = kModelFormatVersion + 1;
  std::ofstream(path) << j.dump();
  CHECK_THROWS_AS(load_model(path), VersionError);
  j["version"] = kModelFormatVersion;
  j["feature_version"] = kFeatureVersion + 1;
  std::ofstream(path) << j.dump();
  CHECK_THROWS_AS(load_model(path), VersionError);
  j["feature_version"] = kFeatureVersion;
  j["format"] = "something-else";
  std::ofstream(path) << j.dump();
  CHECK_THROWS_AS(load_model(path), VersionError);
  std::ofstream(path) << "{not json";
  CHECK_THROWS_AS(load_model(path), Error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), Error);
}

TEST_CASE("features of a constant map") {
  const auto m = DepthMap::filled(8, 8, 0.3f);
  const auto f = extract_features(m, &m, std::nullopt, 1e6);
  CHECK(f.mean_depth == doctest::Approx(0.3));
  CHECK(f.depth_variance == doctest::Approx(0.0));
  CHECK(f.mean_gradient_magnitude == 0.0);
  CHECK(f.edge_density == 0.0);
  CHECK(f.histogram[4] == 1.0);
  CHECK(f.temporal_mad == 0.0);
  CHECK(f.log2_bitrate == doctest::Approx(std::log2(1e6)));
}

TEST_CASE("features of a horizontal ramp") {
  std::vector<float> v(16 * 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 16; ++x) v[y * 16 + x] = (x + 0.5f) / 16.0f;
  }
  const DepthMap m(16, 4, v);
  const auto f = extract_features(m, nullptr, std::nullopt, 1e6);
  CHECK(f.mean_depth == doctest::Approx(0.5));
  for (double h : f.histogram) CHECK(h == doctest::Approx(1.0 / 16));
  // 15 of 16 columns have a 1/16 forward difference
  CHECK(f.mean_gradient_magnitude == doctest::Approx(15.0 / 16 / 16));
  CHECK(f.edge_density == doctest::Approx(15.0 / 16));
  CHECK(f.temporal_mad == 0.0);
}

TEST_CASE("histogram and moments ignore pixel order") {
  std::mt19937_64 rng(15);
  std::vector<float> v(64);
  for (float& x : v) x = std::uniform_real_distribution<float>(0, 1)(rng);
  auto w = v;
  std::shuffle(w.begin(), w.end(), rng);
  const auto a = extract_features(DepthMap(8, 8, v), nullptr, std::nullopt, 1e6);
  const auto b = extract_features(DepthMap(8, 8, w), nullptr, std::nullopt, 1e6);
  CHECK(a.mean_depth == doctest::Approx(b.mean_depth));
  CHECK(a.depth_variance == doctest::Approx(b.depth_variance));
  CHECK(a.histogram == b.histogram);
  double total = 0;
  for (double h : a.histogram) total += h;
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("camera velocities") {
  const CameraState a({0, 0, 0}, Quaternion{}, 0.0);
  const CameraState b({0, 0, 10}, Quaternion{}, 1.0);
  CHECK(linear_velocity({a, b}) == doctest::Approx(10.0));
  const double s = std::sqrt(0.5);
  const CameraState yawed({0, 0, 0}, Quaternion{s, 0, s, 0}, 1.0);
  CHECK(angular_velocity({a, yawed}) == doctest::Approx(std::numbers::pi / 2));
  CHECK(geodesic_angle(Quaternion{}, Quaternion{-1, 0, 0, 0}) == doctest::Approx(0.0));
  const CameraState same_time({1, 0, 0}, Quaternion{}, 0.0);
  CHECK_THROWS_AS(linear_velocity({a, same_time}), TrajectoryError);
  CHECK_THROWS_AS(angular_velocity({b, a}), TrajectoryError);

  const auto m = DepthMap::filled(4, 4, 0.5f);
  const auto f = extract_features(m, &m, CameraPair{a, b}, 1e6);
  CHECK(f.camera_velocity == doctest::Approx(10.0));
  CHECK_THROWS_AS(extract_features(m, &m, CameraPair{b, a}, 1e6), TrajectoryError);
  const auto other = DepthMap::filled(4, 2, 0.5f);
  CHECK_THROWS_AS(extract_features(m, &other, std::nullopt, 1e6), DimensionError);
}

TEST_CASE("sequence features chain frames") {
  std::vector<DepthMap> maps{DepthMap::filled(4, 4, 0.2f), DepthMap::filled(4, 4, 0.5f)};
  std::vector<CameraState> cams{CameraState({0, 0, 0}, Quaternion{}, 0.0),
                                CameraState({3, 4, 0}, Quaternion{}, 0.5)};
  const auto f = extract_sequence_features(maps, cams, 2e6);
  REQUIRE(f.size() == 2);
  CHECK(f[0].temporal_mad == 0.0);
  CHECK(f[0].camera_velocity == 0.0);
  CHECK(f[1].temporal_mad == doctest::Approx(0.3));
  CHECK(f[1].camera_velocity == doctest::Approx(10.0));
  CHECK(extract_sequence_features(maps, {}, 2e6)[1].camera_velocity == 0.0);
  CHECK_THROWS_AS(extract_sequence_features(maps, std::span(cams).first(1), 2e6), DimensionError);
}

TEST_CASE("feature vector layout") {
  CHECK(FeatureVector::names().size() == kFeatureDim);
  std::array<double, kFeatureDim> a;
  for (std::size_t i = 0; i < kFeatureDim; ++i) a[i] = static_cast<double>(i);
  CHECK(FeatureVector::from_array(a).to_array() == a);
  CHECK(FeatureVector::from_array(a).temporal_mad == 20.0);
}
