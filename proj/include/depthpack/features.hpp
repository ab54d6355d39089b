#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depthpack/types.hpp"

namespace depthpack::predictor {

inline constexpr int kHistogramBins = 16;
inline constexpr int kFeatureVersion = 1;
inline constexpr std::size_t kFeatureDim = 8 + kHistogramBins;
// Forward-difference gradient magnitude above which a pixel counts as an edge.
inline constexpr double kEdgeThreshold = 1.0 / 1024.0;

// Summary of one depth map plus the coding context the predictor needs.
struct FeatureVector {
  double mean_depth = 0.0;
  double depth_variance = 0.0;
  double mean_gradient_magnitude = 0.0;
  double edge_density = 0.0;
  std::array<double, kHistogramBins> histogram{};
  double temporal_mad = 0.0;  // vs. the previous map, 0 without one
  double log2_bitrate = 0.0;
  double camera_velocity = 0.0;          // scene units / s
  double camera_angular_velocity = 0.0;  // rad / s

  std::array<double, kFeatureDim> to_array() const;
  static FeatureVector from_array(const std::array<double, kFeatureDim>& values);
  static std::vector<std::string> names();
};

struct CameraPair {
  CameraState previous;
  CameraState current;
};

// Rotation angle between two unit quaternions, in [0, pi].
double geodesic_angle(const Quaternion& a, const Quaternion& b);

// Throw TrajectoryError unless current is strictly later than previous.
double linear_velocity(const CameraPair& cams);
double angular_velocity(const CameraPair& cams);

// Deterministic features; throws DimensionError if prev has another size.
FeatureVector extract_features(const DepthMap& map, const DepthMap* prev,
                               const std::optional<CameraPair>& cams, double bitrate);

// Features of every frame against its predecessor; cameras is empty or has
// one state per map.
std::vector<FeatureVector> extract_sequence_features(std::span<const DepthMap> maps,
                                                    std::span<const CameraState> cameras,
                                                    double bitrate);

}  // namespace depthpack::predictor
