#include "depthpack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "depthpack/parallel.hpp"

namespace depthpack::synth {

namespace {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};
Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
Vec3 normalize(Vec3 a) { return (1.0 / std::sqrt(dot(a, a))) * a; }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_hash(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t h = splitmix(splitmix(splitmix(a) ^ b) ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Pinhole camera looking along `forward`; rays are scaled so their forward
// component is 1, which makes the ray parameter the view-space z distance.
struct Camera {
  Vec3 eye, forward, right, up;
  double tan_half = 0, aspect = 1;

  Camera(Vec3 eye_, Vec3 forward_, double fov_deg, int w, int h) : eye(eye_) {
    forward = normalize(forward_);
    right = normalize(cross(forward, Vec3{0, 1, 0}));
    up = cross(right, forward);
    tan_half = std::tan(fov_deg * std::numbers::pi / 360.0);
    aspect = static_cast<double>(w) / h;
  }

  Vec3 ray(int px, int py, int w, int h) const {
    const double sx = (2.0 * (px + 0.5) / w - 1.0) * tan_half * aspect;
    const double sy = (1.0 - 2.0 * (py + 0.5) / h) * tan_half;
    return forward + sx * right + sy * up;
  }

  // Camera axes (right, up, back) as columns of the rotation to world.
  Quaternion orientation() const {
    const Vec3 back = -1.0 * forward;
    const double m00 = right.x, m01 = up.x, m02 = back.x;
    const double m10 = right.y, m11 = up.y, m12 = back.y;
    const double m20 = right.z, m21 = up.z, m22 = back.z;
    Quaternion q;
    const double trace = m00 + m11 + m22;
    if (trace > 0) {
      const double s = 2.0 * std::sqrt(trace + 1.0);
      q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 > m11 && m00 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m00 - m11 - m22);
      q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m11 - m00 - m22);
      q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
    } else {
      const double s = 2.0 * std::sqrt(1.0 + m22 - m00 - m11);
      q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
    }
    return q.normalized();
  }
};

struct Sphere {
  Vec3 center;
  double radius;
};

// Nearest positive ray parameter hitting the sphere, or +inf.
double hit_sphere(const Sphere& s, Vec3 origin, Vec3 dir) {
  const Vec3 oc = origin - s.center;
  const double a = dot(dir, dir);
  const double b = dot(oc, dir);
  const double c = dot(oc, oc) - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0) return INFINITY;
  const double r = std::sqrt(disc);
  double t = (-b - r) / a;
  if (t <= 0) t = (-b + r) / a;
  return t > 0 ? t : INFINITY;
}

float encode(double z, const Options& o) {
  if (!std::isfinite(z)) return 0.0f;
  return static_cast<float>(depth_from_distance(z, o.near_far));
}

// Renders every pixel with hit(origin, dir) returning the ray parameter.
template <typename Hit>
std::vector<float> render(const Camera& cam, const Options& o, Hit&& hit) {
  std::vector<float> values(static_cast<std::size_t>(o.width) * o.height);
  for (int py = 0; py < o.height; ++py) {
    for (int px = 0; px < o.width; ++px) {
      values[static_cast<std::size_t>(py) * o.width + px] = encode(hit(cam.eye, cam.ray(px, py, o.width, o.height)), o);
    }
  }
  return values;
}

// Seeded value-noise terrain, sampled once on a grid and then interpolated.
class Terrain {
 public:
  static constexpr double kCell = 0.25;
  static constexpr double kAmplitude = 4.0;

  Terrain(std::uint64_t seed, double x0, double x1, double z0, double z1)
      : x0_(x0), z0_(z0) {
    nx_ = static_cast<int>(std::ceil((x1 - x0) / kCell)) + 2;
    nz_ = static_cast<int>(std::ceil((z1 - z0) / kCell)) + 2;
    grid_.resize(static_cast<std::size_t>(nx_) * nz_);
    for (int j = 0; j < nz_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        grid_[static_cast<std::size_t>(j) * nx_ + i] = fbm(seed, x0 + i * kCell, z0 + j * kCell);
      }
    }
  }

  double height(double x, double z) const {
    const double gx = std::clamp((x - x0_) / kCell, 0.0, nx_ - 1.001);
    const double gz = std::clamp((z - z0_) / kCell, 0.0, nz_ - 1.001);
    const int i = static_cast<int>(gx);
    const int j = static_cast<int>(gz);
    const double fx = gx - i, fz = gz - j;
    const double* row = grid_.data() + static_cast<std::size_t>(j) * nx_ + i;
    const double a = row[0] + fx * (row[1] - row[0]);
    const double b = row[nx_] + fx * (row[nx_ + 1] - row[nx_]);
    return a + fz * (b - a);
  }

 private:
  static double lattice(std::uint64_t seed, long long i, long long j) {
    return unit_hash(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
  }

  static double value_noise(std::uint64_t seed, double x, double z) {
    const double fx = std::floor(x), fz = std::floor(z);
    const auto i = static_cast<long long>(fx);
    const auto j = static_cast<long long>(fz);
    double u = x - fx, v = z - fz;
    u = u * u * (3 - 2 * u);
    v = v * v * (3 - 2 * v);
    const double a = lattice(seed, i, j), b = lattice(seed, i + 1, j);
    const double c = lattice(seed, i, j + 1), d = lattice(seed, i + 1, j + 1);
    return (a + u * (b - a)) + v * ((c + u * (d - c)) - (a + u * (b - a)));
  }

  static double fbm(std::uint64_t seed, double x, double z) {
    double sum = 0, weight = 0, amp = 1, freq = 1.0 / 12.0;
    for (int octave = 0; octave < 5; ++octave) {
      sum += amp * value_noise(seed + octave, x * freq, z * freq);
      weight += amp;
      amp *= 0.5;
      freq *= 2.0;
    }
    return kAmplitude * sum / weight;
  }

  double x0_, z0_;
  int nx_ = 0, nz_ = 0;
  std::vector<double> grid_;
};

constexpr double kFlyAltitude = 5.0;
constexpr double kViewRange = 90.0;

Vec3 fly_position(double t, double speed) {
  return {3.0 * std::sin(0.3 * t), kFlyAltitude + 0.5 * std::sin(0.7 * t), speed * t};
}

Vec3 fly_forward(double t) {
  const double yaw = 0.35 * std::sin(0.4 * t);
  const double pitch = -0.2 + 0.05 * std::sin(0.9 * t);
  return {std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch)};
}

Sequence flythrough(const Options& o, std::int64_t first_index) {
  const double duration = o.frames / o.fps;
  const double travel = o.fly_speed * duration;
  const Terrain terrain(o.seed, -kViewRange - 5, kViewRange + 5, -10, travel + kViewRange + 5);
  std::vector<Sphere> spheres;
  for (int k = 0; k < o.spheres; ++k) {
    const double z = 6.0 + unit_hash(o.seed, 101, k) * (travel + 30.0);
    const double x = 3.0 * std::sin(0.3 * z / std::max(o.fly_speed, 1e-9)) +
                     (unit_hash(o.seed, 102, k) - 0.5) * 8.0;
    const double y = kFlyAltitude + (unit_hash(o.seed, 103, k) - 0.5) * 3.0;
    spheres.push_back({{x, y, z}, 0.6 + unit_hash(o.seed, 104, k) * 1.2});
  }
  auto hit = [&](Vec3 eye, Vec3 dir) {
    double best = INFINITY;
    for (const Sphere& s : spheres) best = std::min(best, hit_sphere(s, eye, dir));
    const double len = std::sqrt(dot(dir, dir));
    double t = o.near_far.near_plane();
    double prev = t;
    for (int step = 0; step < 400 && t < std::min(best, kViewRange); ++step) {
      const Vec3 p = eye + t * dir;
      const double gap = p.y - terrain.height(p.x, p.z);
      if (gap < 0) {
        double lo = prev, hi = t;
        for (int it = 0; it < 10; ++it) {
          const double mid = 0.5 * (lo + hi);
          const Vec3 q = eye + mid * dir;
          (q.y - terrain.height(q.x, q.z) < 0 ? hi : lo) = mid;
        }
        return std::min(best, 0.5 * (lo + hi));
      }
      if (dir.y >= 0 && p.y > Terrain::kAmplitude) break;
      prev = t;
      t += std::max(0.4 * gap, 0.03) / len + 0.004 * t;
    }
    return best;
  };
  Sequence seq;
  seq.maps.resize(o.frames);
  seq.cameras.resize(o.frames);
  parallel_for(static_cast<std::size_t>(o.frames), o.workers, [&](std::size_t f) {
    const double t = f / o.fps;
    const Camera cam(fly_position(t, o.fly_speed), fly_forward(t), o.vertical_fov_deg, o.width, o.height);
    seq.maps[f] = DepthMap(o.width, o.height, render(cam, o, hit), first_index + f, t);
    seq.cameras[f] = CameraState({cam.eye.x, cam.eye.y, cam.eye.z}, cam.orientation(), t);
  });
  return seq;
}

Sequence orbit(const Options& o, std::int64_t first_index) {
  // A unit sphere at the origin with smaller ones resting on the ground
  // around it, so the view changes as the camera circles.
  std::vector<Sphere> balls{{{0, 0, 0}, 1.0}};
  for (int k = 0; k < 4; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + unit_hash(o.seed, 202, k)) / 4.0;
    const double r = 0.3 + 0.3 * unit_hash(o.seed, 203, k);
    const double d = 1.8 + 0.7 * unit_hash(o.seed, 204, k);
    balls.push_back({{d * std::sin(a), -1.0 + r, d * std::cos(a)}, r});
  }
  const double phase = 2.0 * std::numbers::pi * unit_hash(o.seed, 201, 0);
  auto hit = [&](Vec3 eye, Vec3 dir) {
    double t = INFINITY;
    for (const Sphere& b : balls) t = std::min(t, hit_sphere(b, eye, dir));
    if (dir.y < 0) t = std::min(t, (-1.0 - eye.y) / dir.y);
    return t;
  };
  Sequence seq;
  seq.maps.resize(o.frames);
  seq.cameras.resize(o.frames);
  parallel_for(static_cast<std::size_t>(o.frames), o.workers, [&](std::size_t f) {
    const double t = f / o.fps;
    const double angle = phase + o.orbit_speed * t;
    const Vec3 eye{4.0 * std::sin(angle), 1.2, 4.0 * std::cos(angle)};
    const Camera cam(eye, Vec3{0, 0, 0} - eye, o.vertical_fov_deg, o.width, o.height);
    seq.maps[f] = DepthMap(o.width, o.height, render(cam, o, hit), first_index + f, t);
    seq.cameras[f] = CameraState({eye.x, eye.y, eye.z}, cam.orientation(), t);
  });
  return seq;
}

Sequence ramp(const Options& o, std::int64_t first_index) {
  Sequence seq;
  for (int f = 0; f < o.frames; ++f) {
    const double t = f / o.fps;
    const double theta = o.ramp_turn * f;
    const double c = std::cos(theta), s = std::sin(theta);
    std::vector<float> values(static_cast<std::size_t>(o.width) * o.height);
    for (int y = 0; y < o.height; ++y) {
      for (int x = 0; x < o.width; ++x) {
        const double v = c * (x + 0.5) / o.width + s * (y + 0.5) / o.height + 0.5 * (1.0 - c - s);
        values[static_cast<std::size_t>(y) * o.width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    seq.maps.emplace_back(o.width, o.height, std::move(values), first_index + f, t);
    // The gradient turns like a camera rolling about its view axis.
    const Quaternion roll{std::cos(theta / 2), 0, 0, std::sin(theta / 2)};
    seq.cameras.emplace_back(std::array<double, 3>{0, 0, 0}, roll, t);
  }
  return seq;
}

Sequence noise(const Options& o, std::int64_t first_index) {
  Sequence seq;
  for (int f = 0; f < o.frames; ++f) {
    const double t = f / o.fps;
    std::vector<float> values(static_cast<std::size_t>(o.width) * o.height);
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<float>(unit_hash(o.seed, static_cast<std::uint64_t>(f), i));
    }
    seq.maps.emplace_back(o.width, o.height, std::move(values), first_index + f, t);
    seq.cameras.emplace_back(std::array<double, 3>{0, 0, 0}, Quaternion{}, t);
  }
  return seq;
}

Sequence generate_kind(const Options& o, std::int64_t first_index) {
  switch (o.kind) {
    case Kind::Ramp: return ramp(o, first_index);
    case Kind::Orbit: return orbit(o, first_index);
    case Kind::Flythrough: return flythrough(o, first_index);
    case Kind::Noise: return noise(o, first_index);
    case Kind::Mixed: break;
  }
  throw ConfigError("a mixed sequence cannot be nested");
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Ramp: return "ramp";
    case Kind::Orbit: return "orbit";
    case Kind::Flythrough: return "flythrough";
    case Kind::Noise: return "noise";
    case Kind::Mixed: return "mixed";
  }
  return "?";
}

Kind parse_kind(const std::string& text) {
  for (Kind k : {Kind::Ramp, Kind::Orbit, Kind::Flythrough, Kind::Noise, Kind::Mixed}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown synthetic sequence kind '" + text + "'");
}

Sequence generate(const Options& o) {
  if (o.width <= 0 || o.height <= 0) throw ConfigError("synthetic map dimensions must be positive");
  if (o.frames <= 0) throw ConfigError("synthetic sequence needs at least one frame");
  if (!(o.fps > 0)) throw ConfigError("fps must be positive");
  if (o.kind != Kind::Mixed) {
    Sequence seq = generate_kind(o, 0);
    seq.near_far = o.near_far;
    seq.fps = o.fps;
    return seq;
  }
  const Kind order[] = {Kind::Flythrough, Kind::Orbit, Kind::Ramp, Kind::Flythrough};
  Sequence out;
  out.near_far = o.near_far;
  out.fps = o.fps;
  int done = 0;
  for (int s = 0; s < 4; ++s) {
    Options part = o;
    part.kind = order[s];
    part.seed = o.seed + 7919ULL * s;
    part.frames = s == 3 ? o.frames - done : o.frames / 4;
    if (s == 3) part.fly_speed = o.fly_speed * 2.5;
    if (part.frames <= 0) continue;
    Sequence seg = generate_kind(part, done);
    for (int f = 0; f < part.frames; ++f) {
      const double t = (done + f) / o.fps;
      out.maps.push_back(seg.maps[f].with_index(done + f, t));
      const CameraState& c = seg.cameras[f];
      out.cameras.emplace_back(c.position(), c.orientation(), t);
    }
    done += part.frames;
  }
  return out;
}

}  // namespace depthpack::synth
