#pragma once

// Matrix-vector products computed directly from packed ternary weights.
//
// Both paths accumulate each output row strictly left to right over columns,
// adding x[c] for +1, subtracting it for -1 and skipping zeros, then apply
// the row scale once. The LUT path does this without branches by adding
// sign * x[c]: activations are finite and the running sum starts at +0.0 and
// can never become -0.0, so adding the signed zero of a 0 code leaves it
// unchanged. The two paths are therefore bitwise identical.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "tq/bitpack.hpp"
#include "tq/error.hpp"
#include "tq/real_width.hpp"

namespace tq {

using Activations = std::vector<double>;

/// Byte -> four decoded slots. Entries with a reserved slot are flagged and
/// record the first reserved slot index.
struct DecodeLUT {
  std::array<std::array<std::int8_t, 4>, 256> codes{};
  std::array<std::array<double, 4>, 256> signs{};  // codes as {-1, 0, +1}; reserved slots read 0
  std::array<std::uint8_t, 256> first_reserved{};  // 4 = none

  bool valid(std::uint8_t byte) const noexcept { return first_reserved[byte] == 4; }

  static constexpr DecodeLUT build() noexcept {
    DecodeLUT lut;
    for (unsigned b = 0; b < 256; ++b) {
      lut.first_reserved[b] = 4;
      for (unsigned slot = 0; slot < 4; ++slot) {
        const auto field = static_cast<std::uint8_t>((b >> (2 * slot)) & 0b11);
        if (field == kReservedCode && lut.first_reserved[b] == 4) lut.first_reserved[b] = static_cast<std::uint8_t>(slot);
        lut.codes[b][slot] = decode_field(field);
        lut.signs[b][slot] = field == kReservedCode ? 0.0 : static_cast<double>(lut.codes[b][slot]);
      }
    }
    return lut;
  }
};

inline constexpr DecodeLUT kDecodeLUT = DecodeLUT::build();

namespace detail {

inline void check_activation(const PackedTensor& p, std::span<const double> x) {
  if (x.size() != p.cols)
    throw Error(ErrorKind::invalid_input, "activation length " + std::to_string(x.size()) + " does not match " +
                                              std::to_string(p.cols) + " columns");
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "non-finite activation");
}

inline void check_shape(const PackedTensor& p) {
  if (p.bytes.size() != packed_size_bytes(p.rows, p.cols) || p.scales.size() != scale_count(p.granularity, p.rows))
    throw Error(ErrorKind::invalid_input, "packed tensor buffers do not match its shape");
}

inline double row_sum_reference(const PackedTensor& p, std::size_t r, std::span<const double> x) {
  const std::span<const std::uint8_t> bytes = p.row(r);
  const std::size_t base = r * p.row_bytes();
  double acc = 0.0;
  for (std::size_t c = 0; c < p.cols; ++c) {
    const unsigned slot = static_cast<unsigned>(c % 4);
    const auto field = static_cast<std::uint8_t>((bytes[c / 4] >> (2 * slot)) & 0b11);
    if (field == 0b01) {
      acc += x[c];
    } else if (field == 0b11) {
      acc -= x[c];
    } else if (field == kReservedCode) {
      throw CorruptDataError(base + c / 4, slot);
    }
  }
  return acc;
}

inline double row_sum_lut(const PackedTensor& p, std::size_t r, std::span<const double> x, const DecodeLUT& lut) {
  const std::span<const std::uint8_t> bytes = p.row(r);
  const std::size_t base = r * p.row_bytes();
  const std::size_t full = p.cols / 4;
  const std::size_t tail = p.cols % 4;
  double acc = 0.0;
  const double* xp = x.data();
  for (std::size_t b = 0; b < full; ++b, xp += 4) {
    const std::uint8_t byte = bytes[b];
    if (byte == 0) continue;
    if (!lut.valid(byte)) throw CorruptDataError(base + b, lut.first_reserved[byte]);
    const auto& q = lut.signs[byte];
    acc += q[0] * xp[0];
    acc += q[1] * xp[1];
    acc += q[2] * xp[2];
    acc += q[3] * xp[3];
  }
  if (tail != 0) {
    const std::uint8_t byte = bytes[full];
    // Only the occupied slots of the final byte are meaningful.
    if (!lut.valid(byte) && lut.first_reserved[byte] < tail) throw CorruptDataError(base + full, lut.first_reserved[byte]);
    const auto& q = lut.signs[byte];
    for (std::size_t s = 0; s < tail; ++s) acc += q[s] * xp[s];
  }
  return acc;
}

}  // namespace detail

inline Activations gemv_reference(const PackedTensor& p, std::span<const double> x) {
  detail::check_shape(p);
  detail::check_activation(p, x);
  Activations out(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r)
    out[r] = static_cast<double>(p.scale_of(r)) * detail::row_sum_reference(p, r, x);
  return out;
}

inline Activations gemv_lut(const PackedTensor& p, std::span<const double> x, const DecodeLUT& lut = kDecodeLUT) {
  detail::check_shape(p);
  detail::check_activation(p, x);
  Activations out(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r)
    out[r] = static_cast<double>(p.scale_of(r)) * detail::row_sum_lut(p, r, x, lut);
  return out;
}

inline Activations gemv(const PackedTensor& p, std::span<const double> x) { return gemv_lut(p, x); }

/// out[j] = gemv(p, xs[j]). Output rows are split across `workers` threads;
/// each output element is computed by exactly one worker, so the result does
/// not depend on the partitioning.
inline std::vector<Activations> gemm(const PackedTensor& p, std::span<const Activations> xs, unsigned workers = 1) {
  detail::check_shape(p);
  for (const Activations& x : xs) detail::check_activation(p, x);
  std::vector<Activations> out(xs.size(), Activations(p.rows));
  if (xs.empty() || p.rows == 0) return out;

  auto run_rows = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const double s = p.scale_of(r);
      for (std::size_t j = 0; j < xs.size(); ++j) out[j][r] = s * detail::row_sum_lut(p, r, xs[j], kDecodeLUT);
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(p.rows)));
  if (workers == 1) {
    run_rows(0, p.rows);
    return out;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> failures(workers);
  const std::size_t chunk = (p.rows + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(p.rows, lo + chunk);
    threads.emplace_back([&, w, lo, hi] {
      try {
        run_rows(lo, hi);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

/// Dense baseline over bf16-stored weights, same accumulation order as the
/// packed paths.
struct DenseBf16Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint16_t> values;

  static DenseBf16Matrix from(const WeightMatrix& w) {
    DenseBf16Matrix m{w.rows(), w.cols(), {}};
    m.values.reserve(w.size());
    for (double v : w.values()) m.values.push_back(to_bf16(static_cast<float>(v)));
    return m;
  }

  std::size_t weight_bytes() const noexcept { return values.size() * sizeof(std::uint16_t); }
};

inline Activations gemv_dense(const DenseBf16Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) throw Error(ErrorKind::invalid_input, "activation length does not match columns");
  Activations out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const std::uint16_t* w = m.values.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += static_cast<double>(from_bf16(w[c])) * x[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace tq
