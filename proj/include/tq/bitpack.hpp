#pragma once

// 2-bit packed ternary codes.
//
// Each code is a 2-bit two's-complement field: +1 -> 0b01, 0 -> 0b00,
// -1 -> 0b11; 0b10 is reserved and never written. Code i of a row lives in
// bits 2*(i%4)..2*(i%4)+1 of byte i/4 of that row. Every row starts on a
// fresh byte; unused trailing slots are 0b00.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tq/error.hpp"
#include "tq/ternary.hpp"

namespace tq {

inline constexpr std::uint8_t kReservedCode = 0b10;

constexpr std::size_t packed_row_bytes(std::size_t cols) noexcept { return (cols + 3) / 4; }

constexpr std::size_t packed_size_bytes(std::size_t rows, std::size_t cols) noexcept {
  return rows * packed_row_bytes(cols);
}

constexpr std::uint8_t encode_code(std::int8_t code) noexcept { return static_cast<std::uint8_t>(code) & 0b11; }

/// Decodes one 2-bit field; the reserved pattern has no code value.
constexpr std::int8_t decode_field(std::uint8_t field) noexcept {
  return field == 0b01 ? 1 : field == 0b11 ? -1 : 0;
}

struct PackedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Granularity granularity = Granularity::per_row;
  std::vector<std::uint8_t> bytes;
  std::vector<float> scales;

  std::size_t row_bytes() const noexcept { return packed_row_bytes(cols); }
  std::span<const std::uint8_t> row(std::size_t r) const { return {bytes.data() + r * row_bytes(), row_bytes()}; }
  float scale_of(std::size_t r) const { return granularity == Granularity::per_row ? scales[r] : scales[0]; }
  std::size_t scale_bytes() const noexcept { return scales.size() * sizeof(float); }

  friend bool operator==(const PackedTensor&, const PackedTensor&) = default;
};

/// Throws CorruptDataError at the first occupied slot holding 0b10.
inline void check_packed_codes(std::span<const std::uint8_t> bytes, std::size_t rows, std::size_t cols) {
  const std::size_t per_row = packed_row_bytes(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t offset = r * per_row + c / 4;
      const unsigned slot = static_cast<unsigned>(c % 4);
      if (((bytes[offset] >> (2 * slot)) & 0b11) == kReservedCode) throw CorruptDataError(offset, slot);
    }
  }
}

inline void validate(const PackedTensor& p) {
  if (p.bytes.size() != packed_size_bytes(p.rows, p.cols))
    throw Error(ErrorKind::invalid_input, "packed buffer holds " + std::to_string(p.bytes.size()) +
                                              " bytes, expected " + std::to_string(packed_size_bytes(p.rows, p.cols)));
  if (p.scales.size() != scale_count(p.granularity, p.rows))
    throw Error(ErrorKind::invalid_input, "packed scale count does not match granularity");
  for (float s : p.scales)
    if (!(s > 0.0f) || !std::isfinite(s)) throw Error(ErrorKind::invalid_input, "packed scales must be positive and finite");
  check_packed_codes(p.bytes, p.rows, p.cols);
}

/// Scales are narrowed to float, the stored width.
inline PackedTensor pack(const TernaryTensor& t) {
  if (t.codes.size() != t.rows * t.cols)
    throw Error(ErrorKind::invalid_input, "ternary tensor code count does not match its shape");
  PackedTensor p;
  p.rows = t.rows;
  p.cols = t.cols;
  p.granularity = t.granularity;
  p.bytes.assign(packed_size_bytes(t.rows, t.cols), 0);
  const std::size_t per_row = p.row_bytes();
  for (std::size_t r = 0; r < t.rows; ++r) {
    std::uint8_t* dst = p.bytes.data() + r * per_row;
    for (std::size_t c = 0; c < t.cols; ++c) {
      const std::int8_t code = t.codes[r * t.cols + c];
      if (code < -1 || code > 1)
        throw Error(ErrorKind::invalid_code,
                    "code " + std::to_string(code) + " at row " + std::to_string(r) + ", col " + std::to_string(c));
      dst[c / 4] |= static_cast<std::uint8_t>(encode_code(code) << (2 * (c % 4)));
    }
  }
  p.scales.reserve(t.scales.size());
  for (double s : t.scales) p.scales.push_back(static_cast<float>(s));
  return p;
}

inline TernaryTensor unpack(const PackedTensor& p) {
  if (p.bytes.size() != packed_size_bytes(p.rows, p.cols))
    throw Error(ErrorKind::invalid_input, "packed buffer size does not match its shape");
  TernaryTensor t;
  t.rows = p.rows;
  t.cols = p.cols;
  t.granularity = p.granularity;
  t.codes.resize(p.rows * p.cols);
  const std::size_t per_row = p.row_bytes();
  for (std::size_t r = 0; r < p.rows; ++r) {
    for (std::size_t c = 0; c < p.cols; ++c) {
      const std::size_t offset = r * per_row + c / 4;
      const unsigned slot = static_cast<unsigned>(c % 4);
      const auto field = static_cast<std::uint8_t>((p.bytes[offset] >> (2 * slot)) & 0b11);
      if (field == kReservedCode) throw CorruptDataError(offset, slot);
      t.codes[r * p.cols + c] = decode_field(field);
    }
  }
  t.scales.assign(p.scales.begin(), p.scales.end());
  return t;
}

}  // namespace tq
