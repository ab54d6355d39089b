#include "depthpack/y4m.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace depthpack::y4m {

std::string header_line(const StreamHeader& h) {
  std::ostringstream out;
  out << "YUV4MPEG2 W" << h.width << " H" << h.height << " F" << h.fps_num << ':'
      << h.fps_den << " Ip A1:1 "
      << (h.chroma_mode == ChromaMode::Full444 ? "C444" : "C420jpeg") << '\n';
  return out.str();
}

std::string encode(std::span<const PackedFrame> frames, int fps_num, int fps_den) {
  if (frames.empty()) throw DataError("cannot write an empty Y4M stream");
  StreamHeader h{frames[0].width(), frames[0].height(), fps_num, fps_den,
                 frames[0].chroma_mode()};
  std::string out = header_line(h);
  for (const PackedFrame& f : frames) {
    if (f.width() != h.width || f.height() != h.height || f.chroma_mode() != h.chroma_mode) {
      throw DimensionError("Y4M frames must share one layout");
    }
    out += "FRAME\n";
    for (int p = 0; p < 3; ++p) {
      auto plane = f.plane(p);
      out.append(reinterpret_cast<const char*>(plane.data()), plane.size());
    }
  }
  return out;
}

namespace {

int parse_int(std::string_view text, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(std::string("malformed Y4M ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

StreamHeader parse_header(std::string_view line) {
  constexpr std::string_view kMagic = "YUV4MPEG2";
  if (line.substr(0, kMagic.size()) != kMagic) throw DataError("missing YUV4MPEG2 signature");
  StreamHeader h;
  h.chroma_mode = ChromaMode::Sub420;  // the format default
  std::size_t pos = kMagic.size();
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view token = line.substr(pos, end - pos);
    pos = end;
    if (token.empty()) continue;
    std::string_view value = token.substr(1);
    switch (token[0]) {
      case 'W': h.width = parse_int(value, "width"); break;
      case 'H': h.height = parse_int(value, "height"); break;
      case 'F': {
        std::size_t colon = value.find(':');
        if (colon == std::string_view::npos) throw DataError("malformed Y4M frame rate");
        h.fps_num = parse_int(value.substr(0, colon), "frame rate");
        h.fps_den = parse_int(value.substr(colon + 1), "frame rate");
        break;
      }
      case 'C':
        if (value.substr(0, 3) == "444") {
          if (value.size() > 3) throw DataError("unsupported Y4M colourspace C" + std::string(value));
          h.chroma_mode = ChromaMode::Full444;
        } else if (value.substr(0, 3) == "420") {
          h.chroma_mode = ChromaMode::Sub420;
        } else {
          throw DataError("unsupported Y4M colourspace C" + std::string(value));
        }
        break;
      default:
        break;  // interlacing, aspect, comments
    }
  }
  if (h.width <= 0 || h.height <= 0) throw DataError("Y4M header lacks positive W/H");
  return h;
}

}  // namespace

std::vector<PackedFrame> decode(std::string_view bytes, StreamHeader* header_out) {
  std::size_t eol = bytes.find('\n');
  if (eol == std::string_view::npos) throw DataError("truncated Y4M header");
  const StreamHeader h = parse_header(bytes.substr(0, eol));
  if (header_out != nullptr) *header_out = h;

  const std::size_t luma = static_cast<std::size_t>(h.width) * h.height;
  const std::size_t chroma = h.chroma_mode == ChromaMode::Sub420
                                 ? static_cast<std::size_t>(h.width / 2) * (h.height / 2)
                                 : luma;
  std::vector<PackedFrame> frames;
  std::size_t pos = eol + 1;
  while (pos < bytes.size()) {
    std::size_t line_end = bytes.find('\n', pos);
    if (line_end == std::string_view::npos || bytes.substr(pos, 5) != "FRAME") {
      throw DataError("malformed Y4M frame header");
    }
    pos = line_end + 1;
    if (bytes.size() - pos < luma + 2 * chroma) throw DataError("truncated Y4M frame payload");
    auto take = [&](std::size_t n) {
      const auto* begin = reinterpret_cast<const std::uint8_t*>(bytes.data() + pos);
      pos += n;
      return std::vector<std::uint8_t>(begin, begin + n);
    };
    auto y = take(luma);
    auto u = take(chroma);
    auto v = take(chroma);
    frames.emplace_back(h.width, h.height, h.chroma_mode, std::move(y), std::move(u),
                        std::move(v));
  }
  return frames;
}

void write_file(const std::filesystem::path& path, std::span<const PackedFrame> frames,
                int fps_num, int fps_den) {
  const std::string bytes = encode(frames, fps_num, fps_den);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<PackedFrame> read_file(const std::filesystem::path& path, StreamHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes, header);
}

}  // namespace depthpack::y4m
