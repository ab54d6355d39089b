#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depthpack/types.hpp"

namespace depthpack::y4m {

struct StreamHeader {
  int width = 0;
  int height = 0;
  int fps_num = 90;
  int fps_den = 1;
  ChromaMode chroma_mode = ChromaMode::Full444;
};

// "YUV4MPEG2 W.. H.. F..:.. Ip A1:1 C444|C420jpeg"
std::string header_line(const StreamHeader& header);

// Serializes a whole uncompressed stream. All frames must share one layout.
std::string encode(std::span<const PackedFrame> frames, int fps_num, int fps_den = 1);

// Parses a stream; throws DataError on a malformed header or truncated frame.
std::vector<PackedFrame> decode(std::string_view bytes, StreamHeader* header = nullptr);

void write_file(const std::filesystem::path& path, std::span<const PackedFrame> frames,
                int fps_num, int fps_den = 1);
std::vector<PackedFrame> read_file(const std::filesystem::path& path,
                                   StreamHeader* header = nullptr);

}  // namespace depthpack::y4m
