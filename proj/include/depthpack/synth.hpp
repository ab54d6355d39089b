#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthpack/types.hpp"

namespace depthpack::synth {

// ramp:       planar gradient; frame 0 is (x + 0.5) / W, later frames rotate
//             the gradient direction slowly.
// orbit:      analytic spheres on a ground plane seen from a camera circling them.
// flythrough: camera flying low over value-noise terrain, optionally with
//             floating spheres.
// noise:      i.i.d. uniform depth per pixel and frame.
// mixed:      consecutive flythrough, orbit, ramp and flythrough segments.
enum class Kind { Ramp, Orbit, Flythrough, Noise, Mixed };

std::string to_string(Kind kind);
Kind parse_kind(const std::string& text);

struct Options {
  Kind kind = Kind::Flythrough;
  int frames = 90;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 1;
  double fps = 90.0;
  NearFar near_far;
  double vertical_fov_deg = 60.0;
  double orbit_speed = 0.5;   // rad/s; 0 keeps the camera still
  double fly_speed = 6.0;     // scene units / s
  double ramp_turn = 0.02;    // rad per frame
  int spheres = 6;            // flythrough obstacles
  unsigned workers = 0;
};

struct Sequence {
  std::vector<DepthMap> maps;
  std::vector<CameraState> cameras;
  NearFar near_far;
  double fps = 90.0;
};

// Deterministic for a given Options value. Throws ConfigError on
// non-positive dimensions or frame count.
Sequence generate(const Options& options);

}  // namespace depthpack::synth
