#include "depthpack/features.hpp"

#include <algorithm>
#include <cmath>

namespace depthpack::predictor {

std::array<double, kFeatureDim> FeatureVector::to_array() const {
  std::array<double, kFeatureDim> out{};
  std::size_t i = 0;
  out[i++] = mean_depth;
  out[i++] = depth_variance;
  out[i++] = mean_gradient_magnitude;
  out[i++] = edge_density;
  for (double h : histogram) out[i++] = h;
  out[i++] = temporal_mad;
  out[i++] = log2_bitrate;
  out[i++] = camera_velocity;
  out[i++] = camera_angular_velocity;
  return out;
}

FeatureVector FeatureVector::from_array(const std::array<double, kFeatureDim>& v) {
  FeatureVector f;
  std::size_t i = 0;
  f.mean_depth = v[i++];
  f.depth_variance = v[i++];
  f.mean_gradient_magnitude = v[i++];
  f.edge_density = v[i++];
  for (double& h : f.histogram) h = v[i++];
  f.temporal_mad = v[i++];
  f.log2_bitrate = v[i++];
  f.camera_velocity = v[i++];
  f.camera_angular_velocity = v[i++];
  return f;
}

std::vector<std::string> FeatureVector::names() {
  std::vector<std::string> out = {"mean_depth", "depth_variance", "mean_gradient_magnitude",
                                  "edge_density"};
  for (int b = 0; b < kHistogramBins; ++b) out.push_back("hist_" + std::to_string(b));
  out.insert(out.end(), {"temporal_mad", "log2_bitrate", "camera_velocity",
                         "camera_angular_velocity"});
  return out;
}

double geodesic_angle(const Quaternion& a, const Quaternion& b) {
  const double dot = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
  return 2.0 * std::acos(std::min(1.0, dot));
}

namespace {

double elapsed(const CameraPair& cams) {
  const double dt = cams.current.timestamp() - cams.previous.timestamp();
  if (!(dt > 0.0)) throw TrajectoryError("camera timestamps must strictly increase");
  return dt;
}

}  // namespace

double linear_velocity(const CameraPair& cams) {
  const double dt = elapsed(cams);
  const auto& p0 = cams.previous.position();
  const auto& p1 = cams.current.position();
  const double dx = p1[0] - p0[0];
  const double dy = p1[1] - p0[1];
  const double dz = p1[2] - p0[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz) / dt;
}

double angular_velocity(const CameraPair& cams) {
  const double dt = elapsed(cams);
  return geodesic_angle(cams.previous.orientation(), cams.current.orientation()) / dt;
}

FeatureVector extract_features(const DepthMap& map, const DepthMap* prev,
                               const std::optional<CameraPair>& cams, double bitrate) {
  if (prev != nullptr && (prev->width() != map.width() || prev->height() != map.height())) {
    throw DimensionError("previous depth map differs in size");
  }
  if (!(bitrate > 0.0)) throw ConfigError("bitrate must be positive");

  FeatureVector f;
  const int w = map.width();
  const int h = map.height();
  const auto values = map.values();
  const double n = static_cast<double>(values.size());

  double sum = 0.0;
  for (float v : values) sum += v;
  f.mean_depth = sum / n;

  double var = 0.0;
  double grad_sum = 0.0;
  std::size_t edges = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = map.at(x, y);
      var += (v - f.mean_depth) * (v - f.mean_depth);
      const double gx = x + 1 < w ? map.at(x + 1, y) - v : 0.0;
      const double gy = y + 1 < h ? map.at(x, y + 1) - v : 0.0;
      const double g = std::sqrt(gx * gx + gy * gy);
      grad_sum += g;
      edges += g > kEdgeThreshold;
      const int bin = std::min(kHistogramBins - 1, static_cast<int>(v * kHistogramBins));
      f.histogram[bin] += 1.0;
    }
  }
  f.depth_variance = var / n;
  f.mean_gradient_magnitude = grad_sum / n;
  f.edge_density = static_cast<double>(edges) / n;
  for (double& bin : f.histogram) bin /= n;

  if (prev != nullptr) {
    const auto pv = prev->values();
    double mad = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      mad += std::abs(static_cast<double>(values[i]) - pv[i]);
    }
    f.temporal_mad = mad / n;
  }
  f.log2_bitrate = std::log2(bitrate);
  if (cams) {
    f.camera_velocity = linear_velocity(*cams);
    f.camera_angular_velocity = angular_velocity(*cams);
  }
  return f;
}

std::vector<FeatureVector> extract_sequence_features(std::span<const DepthMap> maps,
                                                    std::span<const CameraState> cameras,
                                                    double bitrate) {
  if (!cameras.empty() && cameras.size() != maps.size()) {
    throw DimensionError("one camera state per frame expected");
  }
  std::vector<FeatureVector> out;
  out.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    std::optional<CameraPair> cams;
    if (i > 0 && !cameras.empty()) cams = CameraPair{cameras[i - 1], cameras[i]};
    out.push_back(extract_features(maps[i], i > 0 ? &maps[i - 1] : nullptr, cams, bitrate));
  }
  return out;
}

}  // namespace depthpack::predictor
