#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sensel {

/// Caller passed something that violates an operation's preconditions
/// (dimension mismatch, probability out of range, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization that the model guarantees to succeed did not.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Session or message-level contract violation in the sensor management loop.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wire decoding failure; `offset()` is the byte position where it was detected.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace sensel
