#pragma once

// Byte-level mutations of serialized checkpoints for the malformed-input
// tests. with_reserved_code() rewrites the digests so that only the code check
// can reject the result.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "tq/checkpoint.hpp"

namespace tq::testing {

using Bytes = std::vector<std::uint8_t>;

inline Bytes with_bad_magic(Bytes b) {
  b[0] = 'X';
  return b;
}

inline Bytes with_version(Bytes b, std::uint32_t version) {
  store_le(b.data() + 4, version);
  return b;
}

inline Bytes with_flipped_index_byte(Bytes b, std::size_t at = 0) {
  b[kHeaderBytes + at] ^= 0x40;
  return b;
}

inline Bytes truncated(Bytes b, std::size_t len) {
  b.resize(std::min(len, b.size()));
  return b;
}

/// Locates a record by walking the index; returns the file offset of its
/// payload digest and the record itself.
inline std::pair<std::size_t, TensorRecord> find_record(const Bytes& b, const std::string& name) {
  const auto count = load_le<std::uint64_t>(b.data() + 8);
  std::size_t pos = kHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord rec;
    const auto name_len = load_le<std::uint32_t>(b.data() + pos);
    pos += 4;
    rec.name.assign(reinterpret_cast<const char*>(b.data() + pos), name_len);
    pos += name_len + 3;
    const auto rank = load_le<std::uint32_t>(b.data() + pos);
    pos += 4;
    for (std::uint32_t k = 0; k < rank; ++k, pos += 8) rec.shape.push_back(load_le<std::uint64_t>(b.data() + pos));
    rec.data_offset = load_le<std::uint64_t>(b.data() + pos);
    rec.data_length = load_le<std::uint64_t>(b.data() + pos + 8);
    rec.scale_offset = load_le<std::uint64_t>(b.data() + pos + 16);
    rec.scale_length = load_le<std::uint64_t>(b.data() + pos + 24);
    pos += 32;
    if (rec.name == name) return {pos, rec};
    pos += 32;
  }
  throw Error(ErrorKind::invalid_input, "no record '" + name + "'");
}

/// Writes the reserved pattern into `slot` of packed byte `byte_index` of the
/// named record, then recomputes the payload and index digests.
inline Bytes with_reserved_code(Bytes b, const std::string& name, std::size_t byte_index, unsigned slot) {
  const auto [digest_at, rec] = find_record(b, name);
  std::uint8_t& byte = b[rec.data_offset + byte_index];
  byte = static_cast<std::uint8_t>((byte & ~(3u << (2 * slot))) | (2u << (2 * slot)));

  const std::span<const std::uint8_t> data(b.data() + rec.data_offset, rec.data_length);
  const std::span<const std::uint8_t> scales(b.data() + rec.scale_offset, rec.scale_length);
  const Digest payload = sha256(data, scales);
  std::copy(payload.begin(), payload.end(), b.begin() + static_cast<std::ptrdiff_t>(digest_at));

  const auto index_len = load_le<std::uint64_t>(b.data() + 16);
  const Digest index = sha256(std::span<const std::uint8_t>(b.data() + kHeaderBytes, index_len));
  std::copy(index.begin(), index.end(), b.begin() + 24);
  return b;
}

}  // namespace tq::testing
