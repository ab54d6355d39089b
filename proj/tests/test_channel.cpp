#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "depthpack/channel.hpp"

using namespace depthpack;
using namespace depthpack::channel;

namespace {

// The textbook O(n^4) orthonormal 2-D DCT-II and its inverse.
Block brute_dct(const Block& s, bool inverse) {
  Block out{};
  auto alpha = [](int k) { return k == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8); };
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      double acc = 0;
      for (int c = 0; c < 8; ++c) {
        for (int d = 0; d < 8; ++d) {
          if (!inverse) {
            // out[v=a][u=b], s[y=c][x=d]
            acc += alpha(a) * alpha(b) * s[c * 8 + d] * std::cos((2 * c + 1) * a * std::numbers::pi / 16) *
                   std::cos((2 * d + 1) * b * std::numbers::pi / 16);
          } else {
            // out[y=a][x=b], s[v=c][u=d]
            acc += alpha(c) * alpha(d) * s[c * 8 + d] * std::cos((2 * a + 1) * c * std::numbers::pi / 16) *
                   std::cos((2 * b + 1) * d * std::numbers::pi / 16);
          }
        }
      }
      out[a * 8 + b] = acc;
    }
  }
  return out;
}

PackedFrame random_frame(std::mt19937_64& rng, int w, int h, ChromaMode mode, int amplitude) {
  std::uniform_int_distribution<int> base(0, 255);
  std::uniform_int_distribution<int> noise(-amplitude, amplitude);
  const int level = base(rng);
  auto plane = [&](std::size_t n) {
    std::vector<std::uint8_t> p(n);
    for (auto& s : p) s = static_cast<std::uint8_t>(std::clamp(level + noise(rng), 0, 255));
    return p;
  };
  const std::size_t luma = static_cast<std::size_t>(w) * h;
  const std::size_t chroma = mode == ChromaMode::Sub420 ? luma / 4 : luma;
  return PackedFrame(w, h, mode, plane(luma), plane(chroma), plane(chroma));
}

// A drifting gradient with texture; cheap to code but not trivial.
std::vector<PackedFrame> moving_sequence(int frames, int w, int h) {
  std::vector<PackedFrame> out;
  for (int f = 0; f < frames; ++f) {
    std::vector<std::uint8_t> y(w * h), u(w * h), v(w * h);
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        const double phase = 0.15 * (i + 2 * f) + 0.1 * j;
        y[j * w + i] = static_cast<std::uint8_t>(128 + 100 * std::sin(phase));
        u[j * w + i] = static_cast<std::uint8_t>((i * 7 + j * 3 + f * 5) % 256);
        v[j * w + i] = static_cast<std::uint8_t>(128 + 60 * std::cos(0.3 * j - 0.2 * f));
      }
    }
    out.emplace_back(w, h, ChromaMode::Full444, y, u, v);
  }
  return out;
}

}  // namespace

TEST_CASE("dct matches the brute-force definition") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> sample(-255.0, 255.0);
  for (int trial = 0; trial < 200; ++trial) {
    Block b;
    for (double& x : b) x = sample(rng);
    const Block f = forward_dct8x8(b);
    const Block want = brute_dct(b, false);
    const Block back = inverse_dct8x8(f);
    const Block want_back = brute_dct(f, true);
    for (int k = 0; k < 64; ++k) {
      REQUIRE(std::abs(f[k] - want[k]) < 1e-6);
      REQUIRE(std::abs(back[k] - want_back[k]) < 1e-6);
      REQUIRE(std::abs(back[k] - b[k]) < 1e-9);
    }
  }
}

TEST_CASE("quantizer step") {
  CHECK(quant_step(0) == 1.0);
  CHECK(quant_step(4) == 1.0);
  CHECK(quant_step(10) == doctest::Approx(2.0));
  CHECK(quant_step(16) == doctest::Approx(4.0));
  CHECK(quant_step(51) == doctest::Approx(std::exp2(47.0 / 6.0)));
}

TEST_CASE("exp-golomb lengths") {
  CHECK(ue_length(0) == 1);
  CHECK(ue_length(1) == 3);
  CHECK(ue_length(2) == 3);
  CHECK(ue_length(3) == 5);
  CHECK(ue_length(6) == 5);
  CHECK(ue_length(7) == 7);
  CHECK(se_length(0) == 1);
  CHECK(se_length(1) == 3);
  CHECK(se_length(-1) == 3);
  CHECK(se_length(2) == 5);
  CHECK(se_length(-2) == 5);
  CHECK(se_length(4) == 7);
}

TEST_CASE("block bit accounting") {
  std::array<int, 64> levels{};
  CHECK(block_bits(levels) == 1);
  levels[0] = 1;
  // coded flag, ue(nnz - 1), ue(run 0), se(1)
  CHECK(block_bits(levels) == 1 + 1 + 1 + 3);
  levels[5] = -2;
  CHECK(block_bits(levels) == 1 + 3 + 1 + 3 + 5 + 5);
}

TEST_CASE("zigzag order") {
  const auto& zz = zigzag_order();
  const std::array<int, 10> head = {0, 1, 8, 16, 9, 2, 3, 10, 17, 24};
  for (int i = 0; i < 10; ++i) CHECK(zz[i] == head[i]);
  CHECK(zz[63] == 63);
  CHECK(std::set<int>(zz.begin(), zz.end()).size() == 64);
}

TEST_CASE("qp 0 intra reconstruction is within one level") {
  std::mt19937_64 rng(2);
  int worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const PackedFrame f = random_frame(rng, 8, 8, ChromaMode::Full444, 255);
    const CodedFrame c = encode_frame(f, nullptr, 0);
    for (int p = 0; p < 3; ++p) {
      for (std::size_t i = 0; i < f.plane(p).size(); ++i) {
        worst = std::max(worst, std::abs(int(f.plane(p)[i]) - int(c.reconstruction.plane(p)[i])));
      }
    }
  }
  CHECK(worst <= 1);
}

TEST_CASE("bit count never increases with qp") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ChromaMode mode = trial % 2 ? ChromaMode::Sub420 : ChromaMode::Full444;
    const PackedFrame f = random_frame(rng, 24, 16, mode, 8 + trial);
    const PackedFrame ref = random_frame(rng, 24, 16, mode, 8);
    const PackedFrame* prev = trial % 3 ? &ref : nullptr;
    std::int64_t last = encode_frame(f, prev, 0).bit_count;
    for (int qp = 1; qp <= 51; ++qp) {
      const std::int64_t bits = encode_frame(f, prev, qp).bit_count;
      REQUIRE(bits <= last);
      last = bits;
    }
  }
}

TEST_CASE("frame sizes and padding") {
  const auto f = PackedFrame::filled(12, 10, ChromaMode::Full444, 128, 128, 128);
  const CodedFrame c = encode_frame(f, nullptr, 20);
  CHECK(c.bit_count == min_frame_bits(12, 10, ChromaMode::Full444));
  CHECK(min_frame_bits(12, 10, ChromaMode::Full444) == kFrameHeaderBits + 3 * 4);
  CHECK(min_frame_bits(16, 16, ChromaMode::Sub420) == kFrameHeaderBits + 4 + 2);
  CHECK(c.reconstruction == f);
  CHECK(c.frame_type == FrameType::I);
  CHECK(encode_frame(f, &f, 20).frame_type == FrameType::P);
  CHECK_THROWS_AS(encode_frame(f, nullptr, 52), ConfigError);
  const auto other = PackedFrame::filled(8, 8, ChromaMode::Full444, 0, 0, 0);
  CHECK_THROWS_AS(encode_frame(f, &other, 0), DimensionError);
}

TEST_CASE("gop weighting sums to the gop budget") {
  ChannelConfig cfg;
  cfg.target_bitrate = 9e6;
  cfg.fps = 90;
  for (int gop : {1, 2, 3, 10, 90}) {
    cfg.gop = gop;
    RateState state;
    double sum = 0;
    for (int i = 0; i < gop; ++i) {
      sum += frame_target_bits(cfg, state);
      ++state.frames_coded;
    }
    CHECK(sum == doctest::Approx(gop * cfg.frame_budget()));
  }
  cfg.gop = 10;
  RateState s;
  const double intra = frame_target_bits(cfg, s);
  ++s.frames_coded;
  CHECK(intra == doctest::Approx(3 * frame_target_bits(cfg, s)));
  CHECK(ChannelConfig{}.effective_gop() == 90);
}

TEST_CASE("config validation") {
  ChannelConfig cfg;
  cfg.target_bitrate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.qp_max = 52;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.qp_min = 30;
  cfg.qp_max = 20;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.gop = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("black sequence settles at qp 0 far below target") {
  std::vector<PackedFrame> frames(30, PackedFrame::filled(32, 32, ChromaMode::Full444, 0, 0, 0));
  ChannelConfig cfg;
  cfg.target_bitrate = 1e6;
  cfg.fps = 30;
  const auto coded = encode_sequence(frames, cfg);
  for (const auto& c : coded) {
    CHECK(c.qp_used == 0);
    CHECK_FALSE(c.overshoot);
  }
  CHECK(achieved_bitrate(coded, cfg.fps) < 0.1 * cfg.target_bitrate);
}

TEST_CASE("noise at a tiny bitrate pins qp 51 and flags overshoot") {
  std::mt19937_64 rng(4);
  std::vector<PackedFrame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(random_frame(rng, 32, 32, ChromaMode::Full444, 255));
  ChannelConfig cfg;
  cfg.target_bitrate = 1000;
  cfg.fps = 30;
  const auto coded = encode_sequence(frames, cfg);
  for (const auto& c : coded) {
    CHECK(c.qp_used == 51);
    CHECK(c.overshoot);
  }
}

TEST_CASE("rate control is deterministic and close to target") {
  const auto frames = moving_sequence(60, 64, 64);
  ChannelConfig cfg;
  cfg.fps = 30;
  cfg.gop = 30;
  for (double target : {1.5e5, 4e5}) {
    cfg.target_bitrate = target;
    const auto a = encode_sequence(frames, cfg);
    const auto b = encode_sequence(frames, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].bit_count == b[i].bit_count);
      CHECK(a[i].qp_used == b[i].qp_used);
      CHECK(a[i].reconstruction == b[i].reconstruction);
    }
    CHECK(a[0].frame_type == FrameType::I);
    CHECK(a[1].frame_type == FrameType::P);
    CHECK(a[30].frame_type == FrameType::I);
    const double achieved = achieved_bitrate(a, cfg.fps);
    CHECK(std::abs(achieved / target - 1.0) < 0.1);
  }
}

TEST_CASE("sequence errors") {
  ChannelConfig cfg;
  CHECK_THROWS_AS(encode_sequence({}, cfg), ConfigError);
  std::vector<PackedFrame> sub(2, PackedFrame::filled(8, 8, ChromaMode::Sub420, 1, 2, 3));
  CHECK_THROWS_AS(encode_sequence(sub, cfg), ConfigError);
  std::vector<PackedFrame> mixed{PackedFrame::filled(8, 8, ChromaMode::Full444, 1, 2, 3),
                                 PackedFrame::filled(16, 8, ChromaMode::Full444, 1, 2, 3)};
  CHECK_THROWS_AS(encode_sequence(mixed, cfg), DimensionError);
}

TEST_CASE("lossless coder and size csv") {
  std::vector<PackedFrame> frames(3, PackedFrame::filled(8, 8, ChromaMode::Sub420, 1, 2, 3));
  const auto coded = lossless_coder()(frames);
  REQUIRE(coded.size() == 3);
  CHECK(coded[0].bit_count == 8 * (64 + 16 + 16));
  CHECK(coded[2].reconstruction == frames[2]);

  std::ostringstream out;
  write_size_csv(out, coded);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# depthpack ", 0) == 0);
  std::getline(in, line);
  CHECK(line == "frame_index,type,qp,bits");
  std::getline(in, line);
  CHECK(line == "0,I,0,768");
}

TEST_CASE("frame types follow the gop") {
  std::vector<PackedFrame> frames(7, PackedFrame::filled(8, 8, ChromaMode::Full444, 90, 100, 110));
  ChannelConfig cfg;
  cfg.gop = 3;
  const auto coded = encode_sequence(frames, cfg);
  std::string types;
  for (const auto& c : coded) types += to_char(c.frame_type);
  CHECK(types == "IPPIPPI");
  CHECK(encode_sequence(std::span(frames).first(1), cfg).size() == 1);
}
