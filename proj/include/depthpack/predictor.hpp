#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "depthpack/features.hpp"
#include "depthpack/oracle.hpp"

namespace depthpack::predictor {

// Fully connected layer, weights row-major [output][input].
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& weight(int out, int in) { return weights[static_cast<std::size_t>(out) * inputs + in]; }
  double weight(int out, int in) const {
    return weights[static_cast<std::size_t>(out) * inputs + in];
  }
};

// How the network output relates to the predicted MAE. Errors span several
// decades across bitrates, so by default the network regresses log(MAE).
enum class LabelTransform { Identity, Log };

// Smallest error fed into the log transform.
inline constexpr double kLogLabelFloor = 1e-12;

// features -> z-score -> affine -> ReLU -> affine -> ReLU -> affine, one
// output per precision.
struct RegressorModel {
  int feature_version = kFeatureVersion;
  LabelTransform label_transform = LabelTransform::Identity;
  std::vector<int> precisions;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::vector<DenseLayer> layers;

  // Random He-uniform weights, zero biases, identity normalization.
  static RegressorModel create(std::vector<int> precisions, int hidden, std::uint64_t seed);

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().inputs; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().outputs; }
  std::size_t parameter_count() const;
  // Throws DataError on inconsistent shapes or non-finite parameters.
  void validate() const;
};

std::vector<double> normalize_features(const RegressorModel& model, const FeatureVector& x);

// Raw network output on already-normalized inputs.
std::vector<double> forward_normalized(const RegressorModel& model, std::span<const double> z);

// Predicted MAE per precision (the raw output mapped back through the label
// transform).
std::vector<double> forward(const RegressorModel& model, const FeatureVector& x);

double transform_label(LabelTransform transform, double error);

// argmin of the predictions, ties to the lowest precision.
int select_precision(std::span<const double> predicted, std::span<const int> precisions);
int select_precision(const RegressorModel& model, const FeatureVector& x);

// Mean over samples and outputs of |forward_normalized(z) - target|. When
// grad is given it receives the gradient, same shape as model.layers; the
// subgradient at a kink is 0.
double l1_loss(const RegressorModel& model, std::span<const std::vector<double>> inputs,
               std::span<const std::vector<double>> targets,
               std::vector<DenseLayer>* grad = nullptr);

struct Sample {
  FeatureVector features;
  std::vector<double> errors;  // per precision
  int group = 0;               // dataset id
  std::int64_t frame_index = 0;
};

enum class SplitMode {
  Temporal,  // last 20% of frame indices of every group are held out
  Random,
};

struct TrainParams {
  int epochs = 60;
  int batch_size = 10;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int hidden = 64;
  double test_fraction = 0.2;
  SplitMode split = SplitMode::Temporal;
  LabelTransform label_transform = LabelTransform::Log;
  int lr_step_epochs = 0;  // 0 disables step decay
  double lr_gamma = 0.1;
  std::uint64_t seed = 1;
};

struct EpochLoss {
  int epoch = 0;
  double train_l1 = 0.0;  // in transformed label units
  double test_l1 = 0.0;   // NaN when there is no test split
};

struct TrainResult {
  RegressorModel model;
  std::vector<EpochLoss> history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, RegressorModel checkpoint)
      : Error(what), checkpoint_(std::move(checkpoint)) {}
  const RegressorModel& checkpoint() const { return checkpoint_; }

 private:
  RegressorModel checkpoint_;
};

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_dataset(
    std::span<const Sample> samples, const TrainParams& params);

// Mini-batch Adam on the mean L1 loss. Features and labels are standardized
// on the training split; the label scaling is folded into the output layer
// of the returned model. Bit-reproducible for a fixed seed.
TrainResult train(std::span<const Sample> samples, std::vector<int> precisions,
                  const TrainParams& params);

// Keeps an equal number of samples (the smallest group size) per group,
// chosen with a seeded shuffle and returned in original order.
std::vector<Sample> balance_groups(std::span<const Sample> samples, std::uint64_t seed);

// Bitrate-tiered fixed precision. Default: 12 bits below 50 Mbps, 14 above.
struct BaselinePolicy {
  struct Tier {
    double below_bps;
    int bits;
  };
  std::vector<Tier> tiers{{50e6, 12}};
  int otherwise_bits = 14;

  int operator()(double bitrate) const;

  // For each distinct bitrate the precision with the lowest mean error,
  // thresholds at the geometric midpoints between bitrates.
  static BaselinePolicy fit(std::span<const oracle::OracleRecord> records);
};

int baseline_policy(double bitrate);

struct SelectionReport {
  std::size_t count = 0;
  double fraction_optimal = 0.0;
  double mean_error = 0.0;     // error of the chosen precisions
  double oracle_error = 0.0;   // error of the best precisions
};

// chosen[i] must be one of records[i].precisions.
SelectionReport evaluate_choices(std::span<const oracle::OracleRecord> records,
                                 std::span<const int> chosen);

inline constexpr int kModelFormatVersion = 1;

// JSON with format/version tags, feature names and normalization.
void save_model(const std::filesystem::path& path, const RegressorModel& model);
// Throws VersionError for a foreign format, model or feature version.
RegressorModel load_model(const std::filesystem::path& path);

}  // namespace depthpack::predictor
