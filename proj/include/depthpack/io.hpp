#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "depthpack/types.hpp"

namespace depthpack::io {

// PFM: single-channel "Pf", rows stored bottom to top, a negative scale
// line means little-endian samples.
// PGM: binary P5; maxval > 255 means two big-endian bytes per sample.
// RAWF32: headerless little-endian float32 rows plus a JSON sidecar
// "<file>.json" holding width and height.
enum class DepthFormat { Pfm, Pgm16, RawF32 };

std::string to_string(DepthFormat format);
// Accepts "pfm", "pgm", "pgm16", "rawf32" (case-insensitive).
DepthFormat parse_depth_format(const std::string& text);
// From the extension: .pfm, .pgm, .raw/.f32/.rawf32.
DepthFormat format_from_extension(const std::filesystem::path& path);

// Tolerated distance of a float sample outside [0,1] before it is rejected.
inline constexpr double kClampTolerance = 1e-6;

// Throws DataError on malformed headers, truncated payloads, non-finite or
// out-of-range samples.
DepthMap load_depth(const std::filesystem::path& path, DepthFormat format);
DepthMap load_depth(const std::filesystem::path& path);
void save_depth(const std::filesystem::path& path, const DepthMap& map, DepthFormat format);

std::filesystem::path rawf32_sidecar(const std::filesystem::path& path);

struct TrajectoryPoint {
  std::int64_t frame = 0;
  CameraState state;
};

// CSV with columns frame,t_seconds,px,py,pz,qw,qx,qy,qz. Quaternions are
// normalized on load; frames must strictly increase.
std::vector<TrajectoryPoint> load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryPoint>& points);

inline constexpr int kManifestVersion = 1;

// JSON document:
//   {"version": 1, "name": ..., "format": "pfm"|"pgm16"|"rawf32",
//    "width": W, "height": H, "fps": 90, "near": 0.1, "far": 100,
//    "frames": ["f0000.pfm", ...], "trajectory": "traj.csv"}
// Paths are relative to the manifest's directory; "trajectory" is optional.
struct DatasetManifest {
  std::string name;
  std::vector<std::string> frames;
  DepthFormat format = DepthFormat::Pfm;
  int width = 0;
  int height = 0;
  double fps = 90.0;
  NearFar near_far;
  std::optional<std::string> trajectory;

  bool operator==(const DatasetManifest& other) const;
};

// Parses and validates a manifest (at least one frame, positive size and
// fps, referenced files present next to the manifest). Structural problems
// throw ConfigError, missing files DataError.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct Dataset {
  DatasetManifest manifest;
  std::filesystem::path directory;
  std::vector<DepthMap> maps;  // frame_index = position in the manifest
  std::vector<CameraState> cameras;  // empty or one per frame
};

// Loads every frame (checked against the manifest size) and the trajectory.
// A trajectory must cover frames 0..N-1 in order.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes maps as <stem>NNNN.<ext> next to the manifest, plus the trajectory
// when cameras are given.
DatasetManifest write_dataset(const std::filesystem::path& manifest_path, const std::string& name,
                              const std::vector<DepthMap>& maps,
                              const std::vector<CameraState>& cameras, DepthFormat format,
                              double fps, const NearFar& near_far);

}  // namespace depthpack::io
