#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depthpack/channel.hpp"

namespace depthpack::external {

struct ProcessResult {
  int exit_code = 0;
  std::string output;
  std::string error_output;
};

// Runs `command` through /bin/sh, feeding `input` on stdin and collecting
// stdout/stderr. Throws SpawnError when the shell cannot be started or the
// command is not found (exit status 127).
ProcessResult run_process(const std::string& command, std::string_view input);

// Commands for a real codec. The encoder reads Y4M on stdin and writes a
// stream on stdout; the decoder turns that stream back into Y4M. With no
// decoder the encoder output must already be Y4M (e.g. `cat`).
//
// Placeholders {bitrate} {fps} {gop} {width} {height} {pix_fmt} are
// substituted in both commands.
struct ExternalCodec {
  std::string encoder_command;
  std::string decoder_command;
};

std::string expand_command(const std::string& command, const channel::ChannelConfig& cfg,
                           int width, int height);

// Frame sizes are the stream size spread evenly over frames (per-frame
// payload size in Y4M pass-through mode); qp_used is -1.
std::vector<channel::CodedFrame> external_encode(std::span<const PackedFrame> frames,
                                                 const channel::ChannelConfig& cfg,
                                                 const ExternalCodec& codec);

channel::SequenceCoder external_coder(channel::ChannelConfig cfg, ExternalCodec codec);

}  // namespace depthpack::external
