#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tq {

enum class ErrorKind {
  invalid_input,
  invalid_code,
  corrupt_data,
  bad_magic,
  unsupported_version,
  digest_mismatch,
  truncated_region,
  name_collision,
  io,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_code: return "invalid-code";
    case ErrorKind::corrupt_data: return "corrupt-data";
    case ErrorKind::bad_magic: return "bad-magic";
    case ErrorKind::unsupported_version: return "unsupported-version";
    case ErrorKind::digest_mismatch: return "digest-mismatch";
    case ErrorKind::truncated_region: return "truncated-region";
    case ErrorKind::name_collision: return "name-collision";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the packed-code decoder; carries the position of the first
/// reserved slot so callers can report it precisely.
class CorruptDataError : public Error {
 public:
  CorruptDataError(std::size_t byte_offset, unsigned slot, const std::string& context = {})
      : Error(ErrorKind::corrupt_data,
              "reserved code 0b10 at byte offset " + std::to_string(byte_offset) + ", slot " +
                  std::to_string(slot) + (context.empty() ? "" : " (" + context + ")")),
        byte_offset_(byte_offset),
        slot_(slot) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }
  unsigned slot() const noexcept { return slot_; }

 private:
  std::size_t byte_offset_;
  unsigned slot_;
};

}  // namespace tq
