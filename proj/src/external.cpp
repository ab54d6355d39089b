#include "depthpack/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>

#include "depthpack/y4m.hpp"

namespace depthpack::external {

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe(fd) != 0) throw SpawnError(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

// Blocks SIGPIPE for this thread while alive and swallows any that became
// pending, so a child closing stdin early shows up as EPIPE instead.
class SigpipeGuard {
 public:
  SigpipeGuard() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &set_, &old_);
  }
  ~SigpipeGuard() {
    timespec zero{0, 0};
    while (sigtimedwait(&set_, nullptr, &zero) > 0) {
    }
    pthread_sigmask(SIG_SETMASK, &old_, nullptr);
  }

 private:
  sigset_t set_{};
  sigset_t old_{};
};

void replace_all(std::string& text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
}

}  // namespace

ProcessResult run_process(const std::string& command, std::string_view input) {
  Pipe in, out, err;
  SigpipeGuard guard;
  const pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in.fd[0], STDIN_FILENO);
    ::dup2(out.fd[1], STDOUT_FILENO);
    ::dup2(err.fd[1], STDERR_FILENO);
    for (int fd : {in.fd[0], in.fd[1], out.fd[0], out.fd[1], err.fd[0], err.fd[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(126);
  }
  in.close_read();
  out.close_write();
  err.close_write();
  ::fcntl(in.fd[1], F_SETFL, O_NONBLOCK);

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) in.close_write();
  char buffer[1 << 16];
  while (out.fd[0] >= 0 || err.fd[0] >= 0) {
    pollfd fds[3];
    int count = 0;
    int in_slot = -1, out_slot = -1, err_slot = -1;
    if (in.fd[1] >= 0) { in_slot = count; fds[count++] = {in.fd[1], POLLOUT, 0}; }
    if (out.fd[0] >= 0) { out_slot = count; fds[count++] = {out.fd[0], POLLIN, 0}; }
    if (err.fd[0] >= 0) { err_slot = count; fds[count++] = {err.fd[0], POLLIN, 0}; }
    if (::poll(fds, count, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (in_slot >= 0 && fds[in_slot].revents != 0) {
      ssize_t n = ::write(in.fd[1], input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if (written == input.size() || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        in.close_write();
      }
    }
    auto drain = [&](int slot, Pipe& pipe, std::string& sink) {
      if (slot < 0 || fds[slot].revents == 0) return;
      ssize_t n = ::read(pipe.fd[0], buffer, sizeof(buffer));
      if (n > 0) {
        sink.append(buffer, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        pipe.close_read();
      }
    };
    drain(out_slot, out, result.output);
    drain(err_slot, err, result.error_output);
  }
  in.close_write();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (result.exit_code == 126 || result.exit_code == 127) {
    throw SpawnError("cannot run '" + command + "': " + result.error_output);
  }
  return result;
}

std::string expand_command(const std::string& command, const channel::ChannelConfig& cfg,
                           int width, int height) {
  std::string out = command;
  replace_all(out, "{bitrate}", std::to_string(static_cast<long long>(cfg.target_bitrate)));
  replace_all(out, "{fps}", std::to_string(static_cast<long long>(std::lround(cfg.fps))));
  replace_all(out, "{gop}", std::to_string(cfg.effective_gop()));
  replace_all(out, "{width}", std::to_string(width));
  replace_all(out, "{height}", std::to_string(height));
  replace_all(out, "{pix_fmt}",
              cfg.chroma_mode == ChromaMode::Full444 ? "yuv444p" : "yuv420p");
  return out;
}

std::vector<channel::CodedFrame> external_encode(std::span<const PackedFrame> frames,
                                                 const channel::ChannelConfig& cfg,
                                                 const ExternalCodec& codec) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("cannot encode an empty sequence");
  if (codec.encoder_command.empty()) throw ConfigError("no encoder command given");
  const int width = frames[0].width();
  const int height = frames[0].height();
  const int fps = std::max(1, static_cast<int>(std::lround(cfg.fps)));

  const std::string raw = y4m::encode(frames, fps);
  ProcessResult encoded =
      run_process(expand_command(codec.encoder_command, cfg, width, height), raw);
  if (encoded.exit_code != 0) {
    throw SpawnError("encoder exited with status " + std::to_string(encoded.exit_code) +
                     ": " + encoded.error_output);
  }

  std::string decoded_bytes;
  const bool passthrough = codec.decoder_command.empty();
  if (passthrough) {
    decoded_bytes = encoded.output;
  } else {
    ProcessResult decoded = run_process(
        expand_command(codec.decoder_command, cfg, width, height), encoded.output);
    if (decoded.exit_code != 0) {
      throw SpawnError("decoder exited with status " + std::to_string(decoded.exit_code) +
                       ": " + decoded.error_output);
    }
    decoded_bytes = std::move(decoded.output);
  }

  y4m::StreamHeader header;
  std::vector<PackedFrame> recon;
  try {
    recon = y4m::decode(decoded_bytes, &header);
  } catch (const DataError& e) {
    throw DataError(std::string("cannot parse decoded stream: ") + e.what());
  }
  if (recon.size() != frames.size() || header.width != width || header.height != height) {
    throw DataError("decoded stream has " + std::to_string(recon.size()) + " frames of " +
                    std::to_string(header.width) + "x" + std::to_string(header.height) +
                    ", expected " + std::to_string(frames.size()));
  }

  const std::int64_t n = static_cast<std::int64_t>(frames.size());
  const std::int64_t total_bits = 8 * static_cast<std::int64_t>(encoded.output.size());
  const int gop = cfg.effective_gop();
  std::vector<channel::CodedFrame> out;
  out.reserve(frames.size());
  for (std::int64_t i = 0; i < n; ++i) {
    channel::CodedFrame coded;
    if (passthrough) {
      const PackedFrame& r = recon[static_cast<std::size_t>(i)];
      coded.bit_count = 8 * static_cast<std::int64_t>(r.y().size() + r.u().size() + r.v().size());
    } else {
      coded.bit_count = std::max<std::int64_t>(1, total_bits / n + (i < total_bits % n ? 1 : 0));
    }
    coded.qp_used = -1;
    coded.frame_type = i % gop == 0 ? channel::FrameType::I : channel::FrameType::P;
    // Decoders may hand back a different chroma layout than we sent.
    coded.reconstruction = recon[static_cast<std::size_t>(i)].chroma_mode() == cfg.chroma_mode
                               ? std::move(recon[static_cast<std::size_t>(i)])
                               : (cfg.chroma_mode == ChromaMode::Full444
                                      ? upsample_chroma(recon[static_cast<std::size_t>(i)])
                                      : subsample_chroma(recon[static_cast<std::size_t>(i)]));
    out.push_back(std::move(coded));
  }
  return out;
}

channel::SequenceCoder external_coder(channel::ChannelConfig cfg, ExternalCodec codec) {
  return [cfg, codec](std::span<const PackedFrame> frames) {
    return external_encode(frames, cfg, codec);
  };
}

}  // namespace depthpack::external
