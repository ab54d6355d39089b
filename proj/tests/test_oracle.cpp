#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "depthpack/csv.hpp"
#include "depthpack/metrics.hpp"
#include "depthpack/oracle.hpp"

using namespace depthpack;
using namespace depthpack::oracle;

TEST_CASE("argmin prefers the first of equal values") {
  const std::vector<double> a{3, 1, 1, 2};
  CHECK(argmin_index(a) == 1);
  const std::vector<double> b{0.5};
  CHECK(argmin_index(b) == 0);
  const std::vector<double> c{2, 2, 2};
  CHECK(argmin_index(c) == 0);
}

TEST_CASE("settle fills best precision and gap") {
  OracleRecord r;
  r.precisions = {8, 12, 16};
  r.errors_by_precision = {0.3, 0.1, 0.15};
  settle(r);
  CHECK(r.best_precision == 12);
  CHECK(r.second_best_gap == doctest::Approx(0.05));
  r.errors_by_precision = {0.2, 0.2, 0.4};
  settle(r);
  CHECK(r.best_precision == 8);
  CHECK(r.second_best_gap == 0.0);
}

TEST_CASE("precision sets") {
  CHECK(default_precision_set() == std::vector<int>{8, 10, 12, 14, 16, 18, 20, 24});
  const std::vector<int> messy{16, 8, 16, 24};
  CHECK(normalize_precision_set(messy) == std::vector<int>{8, 16, 24});
  CHECK_THROWS_AS(normalize_precision_set(std::vector<int>{}), ConfigError);
  CHECK_THROWS_AS(normalize_precision_set(std::vector<int>{7, 8}), ConfigError);
  CHECK_THROWS_AS(normalize_precision_set(std::vector<int>{25}), ConfigError);
}

TEST_CASE("switch count") {
  CHECK(switch_count(std::vector<int>{}) == 0);
  CHECK(switch_count(std::vector<int>{8}) == 0);
  CHECK(switch_count(std::vector<int>{8, 8, 12, 12, 8, 16}) == 3);
}

TEST_CASE("labels agree with independent pipeline runs") {
  std::vector<DepthMap> maps;
  for (int f = 0; f < 5; ++f) {
    std::vector<float> v(16 * 16);
    for (int i = 0; i < 256; ++i) v[i] = static_cast<float>(0.01 + 0.004 * std::sin(0.3 * i + f));
    maps.emplace_back(16, 16, std::move(v), f);
  }
  channel::ChannelConfig cfg;
  cfg.fps = 30;
  const std::vector<int> precisions{8, 16, 24};
  const auto records = oracle_labels(maps, 1e5, precisions, cfg, 2);
  REQUIRE(records.size() == 5);
  cfg.target_bitrate = 1e5;
  for (std::size_t p = 0; p < precisions.size(); ++p) {
    const auto res = metrics::run_pipeline(maps, PackingConfig::vbp(precisions[p]), cfg);
    for (std::size_t f = 0; f < 5; ++f) CHECK(records[f].errors_by_precision[p] == res.frames[f].mae);
  }
  for (const auto& r : records) {
    CHECK(r.bitrate == 1e5);
    CHECK(r.precisions == precisions);
    CHECK(r.best_precision == precisions[argmin_index(r.errors_by_precision)]);
  }
  CHECK(oracle_labels(maps, 1e5, precisions, cfg, 1)[3].errors_by_precision ==
        records[3].errors_by_precision);
}

TEST_CASE("labels csv round trip") {
  std::vector<OracleRecord> records;
  for (int f = 0; f < 3; ++f) {
    OracleRecord r;
    r.frame_index = f;
    r.bitrate = 2e6;
    r.precisions = {10, 20};
    r.errors_by_precision = {0.001 * (f + 1), 0.0015 * (3 - f)};
    settle(r);
    records.push_back(r);
  }
  std::stringstream io;
  write_labels_csv(io, records);
  CHECK(io.str().rfind("# depthpack", 0) == 0);
  const auto back = read_labels_csv(io);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].frame_index == records[i].frame_index);
    CHECK(back[i].best_precision == records[i].best_precision);
    for (std::size_t p = 0; p < 2; ++p) {
      CHECK(back[i].errors_by_precision[p] == doctest::Approx(records[i].errors_by_precision[p]).epsilon(1e-11));
    }
  }
  std::istringstream bad("frame_index,bitrate,best_bits\n0,1,8\n");
  CHECK_THROWS_AS(read_labels_csv(bad), DataError);
}

TEST_CASE("csv reader") {
  std::istringstream in("# comment\n\na, b ,c\n1,2,\n");
  const auto t = csv::read(in);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "2", ""});
  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS(t.column("z"), DataError);
  CHECK_THROWS_AS(csv::to_double("x1"), DataError);
  CHECK_THROWS_AS(csv::to_int("1.5"), DataError);
  CHECK(csv::to_double("1e-3") == 0.001);
}

TEST_CASE("switch count matches a naive loop") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> labels(rng() % 30);
    for (int& l : labels) l = 8 + 2 * static_cast<int>(rng() % 3);
    int want = 0;
    for (std::size_t i = 1; i < labels.size(); ++i) want += labels[i] != labels[i - 1];
    CHECK(switch_count(labels) == want);
  }
  std::vector<int> alternating;
  for (int i = 0; i < 9; ++i) alternating.push_back(i % 2 ? 12 : 16);
  CHECK(switch_count(alternating) == 8);
}

TEST_CASE("oracle on constant and alternating sequences") {
  channel::ChannelConfig cfg;
  cfg.fps = 30;
  const auto precisions = default_precision_set();

  const std::vector<DepthMap> still(6, DepthMap::filled(32, 32, 0.3f));
  const auto flat = oracle_labels(still, 2e5, precisions, cfg);
  CHECK(switch_count(flat) == 0);

  std::vector<DepthMap> mixed;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int f = 0; f < 10; ++f) {
    std::vector<float> v(32 * 32);
    for (int i = 0; i < 32 * 32; ++i) v[i] = f % 2 ? u(rng) : 0.0123f + 0.001f * (i % 32) / 32.0f;
    mixed.emplace_back(32, 32, std::move(v), f);
  }
  const auto records = oracle_labels(mixed, 2e5, precisions, cfg);
  CHECK(switch_count(records) >= 1);
  for (const auto& r : records) CHECK(r.second_best_gap >= 0.0);
}
