#pragma once

// Little-endian scalar codecs for stored reals: bf16 (2 bytes), f32, f64.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "tq/error.hpp"

namespace tq {

inline bool is_supported_width(unsigned width) noexcept { return width == 2 || width == 4 || width == 8; }

/// Round-to-nearest-even narrowing to bfloat16; NaN stays NaN.
inline std::uint16_t to_bf16(float value) noexcept {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  if (std::isnan(value)) return static_cast<std::uint16_t>((bits >> 16) | 0x0040);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7FFFu + lsb;
  return static_cast<std::uint16_t>(bits >> 16);
}

inline float from_bf16(std::uint16_t half) noexcept {
  return std::bit_cast<float>(static_cast<std::uint32_t>(half) << 16);
}

template <typename T>
inline void store_le(std::uint8_t* dst, T value) noexcept {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, &value, sizeof(T));
  } else {
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = tmp[sizeof(T) - 1 - i];
  }
}

template <typename T>
inline T load_le(const std::uint8_t* src) noexcept {
  T value;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&value, src, sizeof(T));
  } else {
    std::uint8_t tmp[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) tmp[i] = src[sizeof(T) - 1 - i];
    std::memcpy(&value, tmp, sizeof(T));
  }
  return value;
}

inline std::vector<std::uint8_t> encode_reals(std::span<const double> values, unsigned width) {
  if (!is_supported_width(width)) throw Error(ErrorKind::invalid_input, "unsupported real width " + std::to_string(width));
  std::vector<std::uint8_t> out(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint8_t* dst = out.data() + i * width;
    switch (width) {
      case 2: store_le(dst, to_bf16(static_cast<float>(values[i]))); break;
      case 4: store_le(dst, static_cast<float>(values[i])); break;
      default: store_le(dst, values[i]); break;
    }
  }
  return out;
}

inline std::vector<double> decode_reals(std::span<const std::uint8_t> bytes, unsigned width) {
  if (!is_supported_width(width)) throw Error(ErrorKind::invalid_input, "unsupported real width " + std::to_string(width));
  if (bytes.size() % width != 0) throw Error(ErrorKind::invalid_input, "byte count is not a multiple of the real width");
  std::vector<double> out(bytes.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* src = bytes.data() + i * width;
    switch (width) {
      case 2: out[i] = from_bf16(load_le<std::uint16_t>(src)); break;
      case 4: out[i] = load_le<float>(src); break;
      default: out[i] = load_le<double>(src); break;
    }
  }
  return out;
}

}  // namespace tq
