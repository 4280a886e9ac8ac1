#pragma once

// Storage accounting: parameter counts, stored bytes per class and the
// compression ratio against a full-precision baseline width.

#include <cstdint>
#include <string>

#include "tq/error.hpp"

namespace tq {

inline constexpr unsigned kDefaultBaselineWidth = 2;  // bytes per baseline real (16-bit)

struct CompressionReport {
  std::uint64_t total_params = 0;
  std::uint64_t quantized_params = 0;
  std::uint64_t passthrough_params = 0;
  std::uint64_t packed_payload_bytes = 0;
  std::uint64_t scale_bytes = 0;
  std::uint64_t passthrough_bytes = 0;
  unsigned baseline_width = kDefaultBaselineWidth;

  std::uint64_t baseline_bytes() const noexcept { return total_params * baseline_width; }
  std::uint64_t stored_bytes() const noexcept { return packed_payload_bytes + scale_bytes + passthrough_bytes; }

  double quantized_fraction() const noexcept {
    return total_params == 0 ? 0.0 : static_cast<double>(quantized_params) / static_cast<double>(total_params);
  }

  /// baseline / stored; an empty report compresses nothing.
  double ratio() const noexcept {
    return stored_bytes() == 0 ? 1.0 : static_cast<double>(baseline_bytes()) / static_cast<double>(stored_bytes());
  }

  void add_packed(std::uint64_t params, std::uint64_t payload, std::uint64_t scales) noexcept {
    total_params += params;
    quantized_params += params;
    packed_payload_bytes += payload;
    scale_bytes += scales;
  }

  void add_passthrough(std::uint64_t params, std::uint64_t bytes) noexcept {
    total_params += params;
    passthrough_params += params;
    passthrough_bytes += bytes;
  }

  friend bool operator==(const CompressionReport&, const CompressionReport&) = default;
};

/// Closed-form ratio for a model with `quantized_fraction` of its parameters at
/// `code_bits` (+ per-parameter scale overhead) and the rest at `baseline_bits`.
/// The total parameter count cancels; it is accepted for reporting symmetry.
inline double estimate_compression(double total_params, double quantized_fraction, double code_bits,
                                   double baseline_bits, double scale_overhead_bits_per_param) {
  if (!(quantized_fraction >= 0.0 && quantized_fraction <= 1.0))
    throw Error(ErrorKind::invalid_input, "quantized fraction must lie in [0, 1]");
  if (!(code_bits > 0.0) || !(baseline_bits > 0.0) || scale_overhead_bits_per_param < 0.0 || total_params < 0.0)
    throw Error(ErrorKind::invalid_input, "bit widths must be positive");
  const double stored_bits = quantized_fraction * (code_bits + scale_overhead_bits_per_param) +
                             (1.0 - quantized_fraction) * baseline_bits;
  return baseline_bits / stored_bits;
}

/// Scale overhead of one 32-bit scale per row of `cols` parameters.
inline double per_row_scale_overhead_bits(double cols, double scale_bits = 32.0) { return scale_bits / cols; }

}  // namespace tq
