#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sensel/smc.hpp"

namespace sensel::wire {

// Record layout:
//
//   SMC/<version> <tag> <payload-bytes>\n
//   <payload>\n
//
// with tag one of A, B, C, END and the payload a JSON object. Floating-point
// numbers are written with 17 significant digits so decoding restores the
// exact bits. Records concatenate into streams.

inline constexpr int kSchemaVersion = 1;

using Message = std::variant<smc::MessageA, smc::MessageB, smc::MessageC, smc::EndOfService>;

std::string encode_message(const Message& msg);

/// Decodes exactly one record. Throws DecodeError (with byte offset) on a
/// malformed header, unknown version or tag, truncation, bad payload, or
/// trailing bytes.
Message decode_message(std::string_view bytes);

/// Decodes the record starting at `offset`; advances `offset` past it.
Message decode_next(std::string_view bytes, std::size_t& offset);

/// 4-byte big-endian length prefix + payload, for byte-stream transports.
std::string frame(std::string_view payload);

/// Incremental deframer: feed arbitrary chunks, pop whole payloads.
class FrameReader {
 public:
  void feed(std::string_view chunk) { buffer_.append(chunk); }
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

/// Largest accepted frame payload.
inline constexpr std::uint32_t kMaxFrameBytes = 64U << 20;

/// Byte-stream endpoints: `read` returns an empty string at end of stream.
struct Channel {
  std::function<std::string()> read;
  std::function<void(std::string_view)> write;
};

/// Serves one session over `channel`: each step is a framed Message A
/// followed by a framed Message C, answered by a framed Message B. A framed
/// END, or end of stream, closes the session. Returns the number of steps.
std::uint64_t serve(Channel& channel, const ServiceLevelTable& levels,
                    smc::Solver solver = smc::Solver::kGreedy);

/// Serves sessions on a TCP port, one connection at a time. Runs until
/// `max_sessions` connections have been handled (0 = forever).
void serve_tcp(std::uint16_t port, const ServiceLevelTable& levels, smc::Solver solver,
               std::size_t max_sessions = 0,
               const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace sensel::wire
