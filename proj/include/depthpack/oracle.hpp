#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "depthpack/channel.hpp"
#include "depthpack/types.hpp"

namespace depthpack::oracle {

struct OracleRecord {
  std::int64_t frame_index = 0;
  double bitrate = 0.0;
  std::vector<int> precisions;             // ascending bits
  std::vector<double> errors_by_precision;  // MAE, aligned with precisions
  int best_precision = 0;                   // argmin, ties -> lowest bits
  double second_best_gap = 0.0;            // second smallest minus smallest
};

std::vector<int> default_precision_set();

// Sorted, deduplicated copy; throws ConfigError if empty or outside 8..24.
std::vector<int> normalize_precision_set(std::span<const int> precisions);

// Index of the smallest value; the first (lowest bits) wins ties.
std::size_t argmin_index(std::span<const double> values);

// Fills best_precision and second_best_gap from errors_by_precision.
void settle(OracleRecord& record);

// Packs and codes the whole sequence once per VBP precision so each frame
// keeps its inter-frame context, then records every frame's MAE per
// precision. Precisions run in parallel.
std::vector<OracleRecord> oracle_labels(std::span<const DepthMap> maps, double bitrate,
                                        std::span<const int> precision_set,
                                        const channel::ChannelConfig& cfg,
                                        unsigned workers = 0);

// Number of positions whose best precision differs from the previous one.
int switch_count(std::span<const OracleRecord> records);
int switch_count(std::span<const int> labels);

// frame_index,bitrate,err_<b>...,best_bits,second_best_gap
void write_labels_csv(std::ostream& out, std::span<const OracleRecord> records);
std::vector<OracleRecord> read_labels_csv(std::istream& in);

}  // namespace depthpack::oracle
