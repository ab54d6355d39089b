#include "depthpack/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "depthpack/csv.hpp"
#include "json.hpp"

namespace depthpack::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

void write_bytes(const fs::path& path, const std::string& header,
                 const std::vector<unsigned char>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

// Netpbm-style header tokens: whitespace separated, '#' comments to end of
// line, exactly one whitespace byte before the payload.
class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, const fs::path& path, bool comments)
      : bytes_(bytes), path_(path), comments_(comments) {}

  std::string token() {
    skip_space();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) fail("truncated header");
    return out;
  }

  long long integer() {
    const std::string t = token();
    long long v = 0;
    std::size_t used = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      fail("bad header field '" + t + "'");
    }
    if (used != t.size()) fail("bad header field '" + t + "'");
    return v;
  }

  double real() {
    const std::string t = token();
    double v = 0;
    std::size_t used = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      fail("bad header field '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) fail("bad header field '" + t + "'");
    return v;
  }

  std::size_t payload_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("truncated header");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError(path_.string() + ": " + why);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (comments_ && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  bool comments_;
  std::size_t pos_ = 0;
};

void check_dims(long long w, long long h, const HeaderReader& r) {
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) r.fail("invalid dimensions");
}

float sanitize(float v, const fs::path& path) {
  if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite depth sample");
  if (v < -kClampTolerance || v > 1.0 + kClampTolerance) {
    throw DataError(path.string() + ": depth sample " + std::to_string(v) + " outside [0,1]");
  }
  return std::clamp(v, 0.0f, 1.0f);
}

float load_float(const unsigned char* p, bool little) {
  std::uint32_t u = 0;
  if (little) {
    u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
        std::uint32_t(p[3]) << 24;
  } else {
    u = std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 |
        std::uint32_t(p[0]) << 24;
  }
  return std::bit_cast<float>(u);
}

void store_float_le(float v, unsigned char* p) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(u >> (8 * i));
}

DepthMap load_pfm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  HeaderReader r(bytes, path, false);
  const std::string magic = r.token();
  if (magic == "PF") r.fail("three-channel PFM is not a depth map");
  if (magic != "Pf") r.fail("not a PFM file");
  const long long w = r.integer();
  const long long h = r.integer();
  check_dims(w, h, r);
  const double scale = r.real();
  if (scale == 0.0) r.fail("zero scale");
  const std::size_t start = r.payload_start();
  const std::size_t n = static_cast<std::size_t>(w * h);
  if (bytes.size() - start < n * 4) r.fail("truncated payload");
  const bool little = scale < 0.0;
  std::vector<float> values(n);
  for (long long row = 0; row < h; ++row) {
    const std::size_t dst = static_cast<std::size_t>(h - 1 - row) * w;
    const unsigned char* src = bytes.data() + start + static_cast<std::size_t>(row) * w * 4;
    for (long long x = 0; x < w; ++x) values[dst + x] = sanitize(load_float(src + 4 * x, little), path);
  }
  return DepthMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

DepthMap load_pgm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  HeaderReader r(bytes, path, true);
  if (r.token() != "P5") r.fail("not a binary PGM (P5) file");
  const long long w = r.integer();
  const long long h = r.integer();
  check_dims(w, h, r);
  const long long maxval = r.integer();
  if (maxval <= 0 || maxval > 65535) r.fail("maxval out of range");
  const std::size_t start = r.payload_start();
  const std::size_t n = static_cast<std::size_t>(w * h);
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  if (bytes.size() - start < n * bpp) r.fail("truncated payload");
  std::vector<float> values(n);
  const unsigned char* src = bytes.data() + start;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned raw = bpp == 2 ? (unsigned(src[2 * i]) << 8 | src[2 * i + 1]) : src[i];
    if (raw > maxval) r.fail("sample exceeds maxval");
    values[i] = static_cast<float>(static_cast<double>(raw) / static_cast<double>(maxval));
  }
  return DepthMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

DepthMap load_rawf32(const fs::path& path) {
  const fs::path side = rawf32_sidecar(path);
  std::ifstream sin(side);
  if (!sin) throw DataError("missing RAWF32 sidecar " + side.string());
  json meta;
  long long w = 0, h = 0;
  try {
    meta = json::parse(sin);
    w = meta.at("width").get<long long>();
    h = meta.at("height").get<long long>();
  } catch (const json::exception& e) {
    throw DataError(side.string() + ": malformed sidecar: " + e.what());
  }
  if (meta.value("endianness", "little") != "little") {
    throw DataError(side.string() + ": only little-endian RAWF32 is supported");
  }
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) {
    throw DataError(side.string() + ": invalid dimensions");
  }
  const auto bytes = read_bytes(path);
  const std::size_t n = static_cast<std::size_t>(w * h);
  if (bytes.size() < n * 4) throw DataError(path.string() + ": truncated payload");
  if (bytes.size() > n * 4) throw DataError(path.string() + ": payload larger than the sidecar size");
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = sanitize(load_float(bytes.data() + 4 * i, true), path);
  return DepthMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string to_string(DepthFormat format) {
  switch (format) {
    case DepthFormat::Pfm: return "pfm";
    case DepthFormat::Pgm16: return "pgm16";
    case DepthFormat::RawF32: return "rawf32";
  }
  return "?";
}

DepthFormat parse_depth_format(const std::string& text) {
  const std::string t = lower(text);
  if (t == "pfm") return DepthFormat::Pfm;
  if (t == "pgm" || t == "pgm16") return DepthFormat::Pgm16;
  if (t == "rawf32" || t == "raw") return DepthFormat::RawF32;
  throw ConfigError("unknown depth format '" + text + "'");
}

DepthFormat format_from_extension(const fs::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".pfm") return DepthFormat::Pfm;
  if (ext == ".pgm") return DepthFormat::Pgm16;
  if (ext == ".raw" || ext == ".f32" || ext == ".rawf32") return DepthFormat::RawF32;
  throw ConfigError("cannot infer depth format from '" + path.string() + "'");
}

fs::path rawf32_sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

DepthMap load_depth(const fs::path& path, DepthFormat format) {
  switch (format) {
    case DepthFormat::Pfm: return load_pfm(path);
    case DepthFormat::Pgm16: return load_pgm(path);
    case DepthFormat::RawF32: return load_rawf32(path);
  }
  throw ConfigError("unknown depth format");
}

DepthMap load_depth(const fs::path& path) { return load_depth(path, format_from_extension(path)); }

void save_depth(const fs::path& path, const DepthMap& map, DepthFormat format) {
  const int w = map.width();
  const int h = map.height();
  const auto values = map.values();
  std::vector<unsigned char> payload;
  switch (format) {
    case DepthFormat::Pfm: {
      payload.resize(values.size() * 4);
      for (int row = 0; row < h; ++row) {
        const std::size_t src = static_cast<std::size_t>(h - 1 - row) * w;
        for (int x = 0; x < w; ++x) {
          store_float_le(values[src + x], payload.data() + 4 * (static_cast<std::size_t>(row) * w + x));
        }
      }
      write_bytes(path, "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n", payload);
      return;
    }
    case DepthFormat::Pgm16: {
      payload.resize(values.size() * 2);
      for (std::size_t i = 0; i < values.size(); ++i) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(values[i], 0.0f, 1.0f) * 65535.0));
        payload[2 * i] = static_cast<unsigned char>(q >> 8);
        payload[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
      }
      write_bytes(path, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n", payload);
      return;
    }
    case DepthFormat::RawF32: {
      payload.resize(values.size() * 4);
      for (std::size_t i = 0; i < values.size(); ++i) store_float_le(values[i], payload.data() + 4 * i);
      write_bytes(path, "", payload);
      const json meta = {{"format", "rawf32"}, {"width", w}, {"height", h}, {"endianness", "little"}};
      std::ofstream side(rawf32_sidecar(path));
      side << meta.dump() << '\n';
      if (!side) throw DataError("failed writing " + rawf32_sidecar(path).string());
      return;
    }
  }
}

std::vector<TrajectoryPoint> load_trajectory(const fs::path& path) {
  const csv::Table table = csv::read_file(path.string());
  const char* names[] = {"frame", "t_seconds", "px", "py", "pz", "qw", "qx", "qy", "qz"};
  std::size_t col[9];
  for (int i = 0; i < 9; ++i) col[i] = table.column(names[i]);
  std::vector<TrajectoryPoint> points;
  points.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto field = [&](int i) -> const std::string& {
      if (col[i] >= row.size()) throw TrajectoryError(path.string() + ": short row " + std::to_string(r + 1));
      return row[col[i]];
    };
    TrajectoryPoint p;
    p.frame = csv::to_int(field(0));
    if (!points.empty() && p.frame <= points.back().frame) {
      throw TrajectoryError(path.string() + ": frame numbers must strictly increase (row " +
                            std::to_string(r + 1) + ")");
    }
    const Quaternion q{csv::to_double(field(5)), csv::to_double(field(6)), csv::to_double(field(7)),
                       csv::to_double(field(8))};
    if (!(q.norm() > 0.0)) throw TrajectoryError(path.string() + ": zero quaternion");
    p.state = CameraState({csv::to_double(field(2)), csv::to_double(field(3)), csv::to_double(field(4))},
                          q.normalized(), csv::to_double(field(1)));
    points.push_back(p);
  }
  return points;
}

void save_trajectory(const fs::path& path, const std::vector<TrajectoryPoint>& points) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  csv::write_version_comment(out);
  out << "frame,t_seconds,px,py,pz,qw,qx,qy,qz\n";
  for (const TrajectoryPoint& p : points) {
    const auto& pos = p.state.position();
    const auto& q = p.state.orientation();
    out << p.frame << ',' << csv::format_double(p.state.timestamp());
    for (double v : {pos[0], pos[1], pos[2], q.w, q.x, q.y, q.z}) out << ',' << csv::format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  return name == o.name && frames == o.frames && format == o.format && width == o.width &&
         height == o.height && fps == o.fps && near_far.near_plane() == o.near_far.near_plane() &&
         near_far.far_plane() == o.near_far.far_plane() && trajectory == o.trajectory;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed manifest: " + e.what());
  }
  DatasetManifest m;
  try {
    if (!j.is_object()) throw ConfigError(path.string() + ": manifest must be a JSON object");
    const int version = j.at("version").get<int>();
    if (version != kManifestVersion) {
      throw VersionError(path.string() + ": unsupported manifest version " + std::to_string(version));
    }
    m.name = j.value("name", std::string());
    m.frames = j.at("frames").get<std::vector<std::string>>();
    m.format = parse_depth_format(j.at("format").get<std::string>());
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.fps = j.value("fps", 90.0);
    m.near_far = NearFar(j.value("near", 0.1), j.value("far", 100.0));
    if (j.contains("trajectory") && !j["trajectory"].is_null()) {
      m.trajectory = j["trajectory"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": bad manifest field: " + e.what());
  }
  if (m.frames.empty()) throw ConfigError(path.string() + ": manifest lists no frames");
  if (m.width <= 0 || m.height <= 0) throw ConfigError(path.string() + ": invalid width/height");
  if (!(m.fps > 0.0) || !std::isfinite(m.fps)) throw ConfigError(path.string() + ": fps must be positive");
  const fs::path dir = path.parent_path();
  for (const std::string& f : m.frames) {
    if (!fs::is_regular_file(dir / f)) throw DataError(path.string() + ": missing frame file " + f);
  }
  if (m.trajectory && !fs::is_regular_file(dir / *m.trajectory)) {
    throw DataError(path.string() + ": missing trajectory file " + *m.trajectory);
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  json j;
  j["version"] = kManifestVersion;
  j["name"] = m.name;
  j["format"] = to_string(m.format);
  j["width"] = m.width;
  j["height"] = m.height;
  j["fps"] = m.fps;
  j["near"] = m.near_far.near_plane();
  j["far"] = m.near_far.far_plane();
  j["frames"] = m.frames;
  if (m.trajectory) j["trajectory"] = *m.trajectory;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.directory = manifest_path.parent_path();
  const DatasetManifest& m = ds.manifest;
  ds.maps.reserve(m.frames.size());
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    DepthMap map = load_depth(ds.directory / m.frames[i], m.format);
    if (map.width() != m.width || map.height() != m.height) {
      throw DimensionError(m.frames[i] + " is " + std::to_string(map.width()) + "x" +
                           std::to_string(map.height()) + ", manifest says " +
                           std::to_string(m.width) + "x" + std::to_string(m.height));
    }
    ds.maps.push_back(map.with_index(static_cast<std::int64_t>(i), static_cast<double>(i) / m.fps));
  }
  if (m.trajectory) {
    const auto points = load_trajectory(ds.directory / *m.trajectory);
    if (points.size() < m.frames.size()) {
      throw TrajectoryError("trajectory has fewer poses than the manifest has frames");
    }
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
      if (points[i].frame != static_cast<std::int64_t>(i)) {
        throw TrajectoryError("trajectory frame numbers must run 0..N-1");
      }
      ds.cameras.push_back(points[i].state);
    }
  }
  return ds;
}

DatasetManifest write_dataset(const fs::path& manifest_path, const std::string& name,
                              const std::vector<DepthMap>& maps,
                              const std::vector<CameraState>& cameras, DepthFormat format,
                              double fps, const NearFar& near_far) {
  if (maps.empty()) throw ConfigError("no frames to write");
  if (!cameras.empty() && cameras.size() != maps.size()) {
    throw DimensionError("one camera state per frame expected");
  }
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const std::string ext = format == DepthFormat::Pfm ? ".pfm" : format == DepthFormat::Pgm16 ? ".pgm" : ".raw";
  const std::string stem = manifest_path.stem().string();
  DatasetManifest m;
  m.name = name;
  m.format = format;
  m.width = maps.front().width();
  m.height = maps.front().height();
  m.fps = fps;
  m.near_far = near_far;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    std::ostringstream file;
    file << stem << '_' << std::setw(4) << std::setfill('0') << i << ext;
    save_depth(dir / file.str(), maps[i], format);
    m.frames.push_back(file.str());
  }
  if (!cameras.empty()) {
    std::vector<TrajectoryPoint> points;
    for (std::size_t i = 0; i < cameras.size(); ++i) points.push_back({static_cast<std::int64_t>(i), cameras[i]});
    m.trajectory = stem + "_trajectory.csv";
    save_trajectory(dir / *m.trajectory, points);
  }
  save_manifest(manifest_path, m);
  return m;
}

}  // namespace depthpack::io
