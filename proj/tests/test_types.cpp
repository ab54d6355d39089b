#include <cmath>

#include "doctest.h"
#include "depthpack/types.hpp"

using namespace depthpack;

TEST_CASE("depth map validates size and range") {
  CHECK_THROWS_AS(DepthMap(2, 2, {0.f, 0.f, 0.f}), DimensionError);
  CHECK_THROWS_AS(DepthMap(0, 2, {}), DimensionError);
  CHECK_THROWS_AS(DepthMap(1, 2, {0.f, 1.5f}), DataError);
  CHECK_THROWS_AS(DepthMap(1, 1, {std::nanf("")}), DataError);
  const DepthMap m(2, 1, {0.25f, 1.f}, 7, 0.5);
  CHECK(m.at(1, 0) == 1.f);
  CHECK(m.frame_index() == 7);
  CHECK(*m.timestamp() == 0.5);
  CHECK(m.with_index(3).frame_index() == 3);
}

TEST_CASE("camera state needs a unit quaternion") {
  CHECK_THROWS_AS(CameraState({0, 0, 0}, Quaternion{2, 0, 0, 0}, 0.0), DataError);
  CHECK_NOTHROW(CameraState({0, 0, 0}, Quaternion{2, 0, 0, 0}.normalized(), 0.0));
  CHECK_THROWS_AS((Quaternion{0, 0, 0, 0}.normalized()), DataError);
}

TEST_CASE("near/far ordering") {
  CHECK_THROWS_AS(NearFar(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(NearFar(2.0, 1.0), ConfigError);
  const NearFar nf;
  CHECK(nf.near_plane() == 0.1);
  CHECK(nf.far_plane() == 100.0);
}

TEST_CASE("linearize endpoints and midpoint") {
  const NearFar nf(0.1, 100.0);
  CHECK(linearize(1.0, nf) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(linearize(0.0, nf) == doctest::Approx(100.0).epsilon(1e-12));
  // n f / (n + d (f - n)) at d = 0.5
  CHECK(linearize(0.5, nf) == doctest::Approx(10.0 / 50.05).epsilon(1e-12));
  CHECK(linearize(0.5, nf) == doctest::Approx(0.19980).epsilon(1e-4));
}

TEST_CASE("linearize is strictly decreasing and inverted by depth_from_distance") {
  const NearFar nf(0.1, 100.0);
  double prev = linearize(0.0, nf);
  for (int i = 1; i <= 1000; ++i) {
    const double d = i / 1000.0;
    const double z = linearize(d, nf);
    CHECK(z < prev);
    CHECK(depth_from_distance(z, nf) == doctest::Approx(d).epsilon(1e-9));
    prev = z;
  }
  CHECK(depth_from_distance(0.01, nf) == 1.0);
  CHECK(depth_from_distance(1e6, nf) == 0.0);
}

TEST_CASE("quantize8 rounds half up and clamps") {
  CHECK(quantize8(0.0) == 0);
  CHECK(quantize8(1.0) == 255);
  CHECK(quantize8(127.5 / 255.0) == 128);
  CHECK(quantize8(127.49 / 255.0) == 127);
  CHECK(quantize8(-0.3) == 0);
  CHECK(quantize8(1.7) == 255);
}

TEST_CASE("packed frame plane sizes") {
  CHECK_THROWS_AS(PackedFrame(3, 2, ChromaMode::Sub420, std::vector<std::uint8_t>(6),
                              std::vector<std::uint8_t>(1), std::vector<std::uint8_t>(1)),
                  DimensionError);
  CHECK_THROWS_AS(PackedFrame(2, 2, ChromaMode::Full444, std::vector<std::uint8_t>(4),
                              std::vector<std::uint8_t>(1), std::vector<std::uint8_t>(4)),
                  DimensionError);
  const auto f = PackedFrame::filled(4, 2, ChromaMode::Sub420, 1, 2, 3);
  CHECK(f.u().size() == 2);
  CHECK(f.chroma_width() == 2);
  CHECK(f.chroma_height() == 1);
}

TEST_CASE("subsample chroma block means") {
  const PackedFrame f(2, 2, ChromaMode::Full444, {1, 2, 3, 4}, {10, 10, 10, 10}, {0, 0, 255, 255});
  const PackedFrame s = subsample_chroma(f);
  CHECK(s.chroma_mode() == ChromaMode::Sub420);
  CHECK(s.u()[0] == 10);
  CHECK(s.v()[0] == 128);
  CHECK(std::vector<std::uint8_t>(s.y().begin(), s.y().end()) == std::vector<std::uint8_t>{1, 2, 3, 4});
  CHECK_THROWS_AS(subsample_chroma(PackedFrame::filled(3, 2, ChromaMode::Full444, 0, 0, 0)),
                  DimensionError);
}

TEST_CASE("upsample chroma replicates") {
  const PackedFrame s(2, 2, ChromaMode::Sub420, {0, 0, 0, 0}, {77}, {5});
  const PackedFrame u = upsample_chroma(s);
  CHECK(u.chroma_mode() == ChromaMode::Full444);
  for (std::uint8_t v : u.u()) CHECK(v == 77);
  for (std::uint8_t v : u.v()) CHECK(v == 5);
  CHECK(subsample_chroma(u) == s);

  const auto constant = PackedFrame::filled(4, 4, ChromaMode::Full444, 9, 8, 7);
  CHECK(upsample_chroma(subsample_chroma(constant)) == constant);

  const PackedFrame checker(2, 2, ChromaMode::Full444, {0, 0, 0, 0}, {0, 255, 0, 255}, {0, 0, 0, 0});
  CHECK_FALSE(upsample_chroma(subsample_chroma(checker)) == checker);
}

TEST_CASE("subsample of upsample is the identity on random 4:2:0 frames") {
  std::uint32_t state = 12345;
  auto next = [&] { return static_cast<std::uint8_t>((state = state * 1664525u + 1013904223u) >> 24); };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> y(16), u(4), v(4);
    for (auto& s : y) s = next();
    for (auto& s : u) s = next();
    for (auto& s : v) s = next();
    const PackedFrame f(4, 4, ChromaMode::Sub420, y, u, v);
    CHECK(subsample_chroma(upsample_chroma(f)) == f);
  }
}

TEST_CASE("packing config validation") {
  CHECK_THROWS_AS(PackingConfig::vbp(7), ConfigError);
  CHECK_THROWS_AS(PackingConfig::vbp(25), ConfigError);
  CHECK_THROWS_AS(PackingConfig::rp(0), ConfigError);
  CHECK_THROWS_AS(PackingConfig::rp(1000), ConfigError);
  CHECK_THROWS_AS(PackingConfig::rp(1 << 16), ConfigError);
  CHECK(PackingConfig::rp(1 << 15).period() == 32768);
  CHECK(PackingConfig().bits() == 16);
  CHECK(PackingConfig::parse("RP", 512) == PackingConfig::rp(512));
  CHECK(PackingConfig::vbp(12).label() == "VBP12");
  CHECK_THROWS_AS(PackingConfig::vbp(12).period(), ConfigError);
  CHECK_THROWS_AS(PackingConfig::parse("XYZ", 1), ConfigError);
}

TEST_CASE("chroma mode names") {
  CHECK(parse_chroma_mode("420") == ChromaMode::Sub420);
  CHECK(to_string(ChromaMode::Full444) == "444");
  CHECK_THROWS_AS(parse_chroma_mode("422"), ConfigError);
}
