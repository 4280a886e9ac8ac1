#pragma once

// Absmean ternarization of weight matrices: codes in {-1, 0, +1} with one
// positive scale per row (or one per tensor).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tq/error.hpp"

namespace tq {

enum class Granularity : std::uint8_t { per_row = 0, per_tensor = 1 };

enum class Rounding : std::uint8_t { half_away_from_zero = 0 };

inline std::string to_string(Granularity g) {
  return g == Granularity::per_row ? "per-row" : "per-tensor";
}

inline Granularity parse_granularity(std::string_view text) {
  if (text == "per-row") return Granularity::per_row;
  if (text == "per-tensor") return Granularity::per_tensor;
  throw Error(ErrorKind::config, "unknown granularity '" + std::string(text) + "'");
}

inline std::size_t scale_count(Granularity g, std::size_t rows) {
  return g == Granularity::per_row ? rows : 1;
}

struct QuantConfig {
  Granularity granularity = Granularity::per_row;
  Rounding rounding = Rounding::half_away_from_zero;
  double zero_scale_epsilon = 1e-12;
  std::string layer_pattern = "block.*linear.*";
  std::size_t calib_samples = 128;
  std::size_t calib_rounds = 1;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(zero_scale_epsilon > 0.0) || !std::isfinite(zero_scale_epsilon))
      throw Error(ErrorKind::config, "zero-scale-epsilon must be a positive finite number");
  }
};

/// Dense row-major matrix of full-precision weights.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}
  WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
      throw Error(ErrorKind::invalid_input, "weight matrix holds " + std::to_string(values_.size()) +
                                                " values, expected " + std::to_string(rows_ * cols_));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Ternary codes plus positive scales; dequantized weight is scale * code.
struct TernaryTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Granularity granularity = Granularity::per_row;
  std::vector<std::int8_t> codes;
  std::vector<double> scales;

  double scale_of(std::size_t r) const { return granularity == Granularity::per_row ? scales[r] : scales[0]; }
  std::int8_t code(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }

  void validate() const {
    if (codes.size() != rows * cols)
      throw Error(ErrorKind::invalid_input, "ternary tensor code count does not match its shape");
    if (scales.size() != scale_count(granularity, rows))
      throw Error(ErrorKind::invalid_input, "ternary tensor scale count does not match its granularity");
    for (std::size_t i = 0; i < codes.size(); ++i)
      if (codes[i] < -1 || codes[i] > 1)
        throw Error(ErrorKind::invalid_code, "code " + std::to_string(codes[i]) + " at index " + std::to_string(i));
    for (double s : scales)
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::invalid_input, "scales must be positive and finite");
  }

  friend bool operator==(const TernaryTensor&, const TernaryTensor&) = default;
};

struct QuantError {
  double max_abs_error = 0.0;
  double mse = 0.0;
};

namespace detail {

inline void require_finite(const WeightMatrix& w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!std::isfinite(w.values()[i]))
      throw Error(ErrorKind::invalid_input, "non-finite weight at flat index " + std::to_string(i));
}

inline double guarded_mean_abs(std::span<const double> xs, double epsilon) {
  if (xs.empty()) return 1.0;
  double sum = 0.0;
  for (double v : xs) sum += std::abs(v);
  const double mean = sum / static_cast<double>(xs.size());
  return mean < epsilon ? 1.0 : mean;
}

inline std::int8_t round_clamp(double ratio) {
  // std::round is half-away-from-zero.
  const double q = std::round(ratio);
  return static_cast<std::int8_t>(std::clamp(q, -1.0, 1.0));
}

}  // namespace detail

inline std::vector<double> absmean_scale(const WeightMatrix& w, Granularity granularity, double epsilon = 1e-12) {
  detail::require_finite(w);
  if (granularity == Granularity::per_tensor) return {detail::guarded_mean_abs(w.values(), epsilon)};
  std::vector<double> scales(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) scales[r] = detail::guarded_mean_abs(w.row(r), epsilon);
  return scales;
}

/// Assigns codes clamp(round(w / scale), -1, 1) under the given scales.
inline TernaryTensor assign_codes(const WeightMatrix& w, Granularity granularity, std::vector<double> scales) {
  TernaryTensor t;
  t.rows = w.rows();
  t.cols = w.cols();
  t.granularity = granularity;
  t.scales = std::move(scales);
  if (t.scales.size() != scale_count(granularity, t.rows))
    throw Error(ErrorKind::invalid_input, "scale count does not match granularity");
  t.codes.resize(w.size());
  for (std::size_t r = 0; r < t.rows; ++r) {
    const double s = t.scale_of(r);
    for (std::size_t c = 0; c < t.cols; ++c) t.codes[r * t.cols + c] = detail::round_clamp(w(r, c) / s);
  }
  return t;
}

inline TernaryTensor ternarize(const WeightMatrix& w, const QuantConfig& cfg = {}) {
  cfg.validate();
  return assign_codes(w, cfg.granularity, absmean_scale(w, cfg.granularity, cfg.zero_scale_epsilon));
}

inline WeightMatrix dequantize(const TernaryTensor& t) {
  t.validate();
  WeightMatrix out(t.rows, t.cols);
  for (std::size_t r = 0; r < t.rows; ++r) {
    const double s = t.scale_of(r);
    for (std::size_t c = 0; c < t.cols; ++c) out(r, c) = s * static_cast<double>(t.code(r, c));
  }
  return out;
}

inline QuantError quantization_error(const WeightMatrix& w, const TernaryTensor& t) {
  if (w.rows() != t.rows || w.cols() != t.cols)
    throw Error(ErrorKind::invalid_input, "shape mismatch between weights and ternary tensor");
  const WeightMatrix approx = dequantize(t);
  QuantError err;
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w.values()[i] - approx.values()[i];
    err.max_abs_error = std::max(err.max_abs_error, std::abs(d));
    sq += d * d;
  }
  err.mse = w.size() == 0 ? 0.0 : sq / static_cast<double>(w.size());
  return err;
}

}  // namespace tq
