#include "depthpack/oracle.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "depthpack/csv.hpp"
#include "depthpack/metrics.hpp"
#include "depthpack/parallel.hpp"

namespace depthpack::oracle {

std::vector<int> default_precision_set() { return {8, 10, 12, 14, 16, 18, 20, 24}; }

std::vector<int> normalize_precision_set(std::span<const int> precisions) {
  std::vector<int> out(precisions.begin(), precisions.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ConfigError("precision set is empty");
  if (out.front() < PackingConfig::kMinBits || out.back() > PackingConfig::kMaxBits) {
    throw ConfigError("precision set must lie within 8..24 bits");
  }
  return out;
}

std::size_t argmin_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

void settle(OracleRecord& r) {
  if (r.errors_by_precision.empty() || r.errors_by_precision.size() != r.precisions.size()) {
    throw DataError("oracle record has mismatched precision and error lists");
  }
  const std::size_t best = argmin_index(r.errors_by_precision);
  r.best_precision = r.precisions[best];
  double second = r.errors_by_precision[best];
  bool found = false;
  for (std::size_t i = 0; i < r.errors_by_precision.size(); ++i) {
    if (i == best) continue;
    if (!found || r.errors_by_precision[i] < second) second = r.errors_by_precision[i];
    found = true;
  }
  r.second_best_gap = found ? second - r.errors_by_precision[best] : 0.0;
}

std::vector<OracleRecord> oracle_labels(std::span<const DepthMap> maps, double bitrate,
                                        std::span<const int> precision_set,
                                        const channel::ChannelConfig& cfg, unsigned workers) {
  if (maps.empty()) throw ConfigError("oracle needs a non-empty sequence");
  const std::vector<int> precisions = normalize_precision_set(precision_set);
  channel::ChannelConfig cc = cfg;
  cc.target_bitrate = bitrate;

  std::vector<std::vector<double>> errors(precisions.size());
  parallel_for(precisions.size(), workers, [&](std::size_t p) {
    metrics::PipelineResult run =
        metrics::run_pipeline(maps, PackingConfig::vbp(precisions[p]), cc);
    errors[p].reserve(maps.size());
    for (const metrics::ErrorReport& r : run.frames) errors[p].push_back(r.mae);
  });

  std::vector<OracleRecord> records(maps.size());
  for (std::size_t f = 0; f < maps.size(); ++f) {
    OracleRecord& r = records[f];
    r.frame_index = maps[f].frame_index();
    r.bitrate = bitrate;
    r.precisions = precisions;
    for (std::size_t p = 0; p < precisions.size(); ++p) {
      r.errors_by_precision.push_back(errors[p][f]);
    }
    settle(r);
  }
  return records;
}

int switch_count(std::span<const int> labels) {
  int switches = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) switches += labels[i] != labels[i - 1];
  return switches;
}

int switch_count(std::span<const OracleRecord> records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const OracleRecord& r : records) labels.push_back(r.best_precision);
  return switch_count(labels);
}

void write_labels_csv(std::ostream& out, std::span<const OracleRecord> records) {
  csv::write_version_comment(out);
  if (records.empty()) {
    out << "frame_index,bitrate,best_bits,second_best_gap\n";
    return;
  }
  const std::vector<int>& precisions = records.front().precisions;
  out << "frame_index,bitrate";
  for (int b : precisions) out << ",err_" << b;
  out << ",best_bits,second_best_gap\n";
  for (const OracleRecord& r : records) {
    if (r.precisions != precisions) {
      throw DataError("all oracle records in one file must share a precision set");
    }
    out << r.frame_index << ',' << csv::format_double(r.bitrate);
    for (double e : r.errors_by_precision) out << ',' << csv::format_double(e);
    out << ',' << r.best_precision << ',' << csv::format_double(r.second_best_gap) << '\n';
  }
}

std::vector<OracleRecord> read_labels_csv(std::istream& in) {
  const csv::Table table = csv::read(in);
  std::vector<int> precisions;
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.rfind("err_", 0) == 0) {
      precisions.push_back(static_cast<int>(csv::to_int(name.substr(4))));
      columns.push_back(c);
    }
  }
  if (precisions.empty()) throw DataError("label file has no err_<bits> columns");
  const std::size_t frame_col = table.column("frame_index");
  const std::size_t bitrate_col = table.column("bitrate");
  std::vector<OracleRecord> records;
  for (const auto& row : table.rows) {
    OracleRecord r;
    r.frame_index = csv::to_int(row[frame_col]);
    r.bitrate = csv::to_double(row[bitrate_col]);
    r.precisions = precisions;
    for (std::size_t c : columns) r.errors_by_precision.push_back(csv::to_double(row[c]));
    settle(r);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace depthpack::oracle
