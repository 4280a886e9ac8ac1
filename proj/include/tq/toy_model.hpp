#pragma once

// Toy residual feed-forward stack used for end-to-end parity checks:
//   h <- h + linear2(gelu(linear1(h)))   per block
// with linear1: hidden x width, linear2: width x hidden (hidden = 4 * width
// for generated models). Tensors are named "block.{i}.linear{1,2}".

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tq/checkpoint.hpp"
#include "tq/compression.hpp"
#include "tq/error.hpp"
#include "tq/kernel.hpp"
#include "tq/ternary.hpp"

namespace tq {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline std::string linear_name(std::size_t block, int which) {
  return "block." + std::to_string(block) + ".linear" + std::to_string(which);
}

struct ToyBlock {
  WeightMatrix linear1;
  WeightMatrix linear2;
};

struct ToyModel {
  std::size_t width = 0;
  std::vector<ToyBlock> blocks;

  std::size_t depth() const noexcept { return blocks.size(); }
};

using Linear = std::variant<WeightMatrix, PackedTensor>;

struct QuantizedBlock {
  Linear linear1;
  Linear linear2;
};

struct QuantizedModel {
  std::size_t width = 0;
  std::vector<QuantizedBlock> blocks;

  std::size_t depth() const noexcept { return blocks.size(); }
};

inline Activations dense_matvec(const WeightMatrix& w, std::span<const double> x) {
  if (x.size() != w.cols()) throw Error(ErrorKind::invalid_input, "activation length does not match columns");
  Activations y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline Activations apply(const Linear& layer, std::span<const double> x) {
  if (const auto* w = std::get_if<WeightMatrix>(&layer)) return dense_matvec(*w, x);
  return gemv(std::get<PackedTensor>(layer), x);
}

namespace detail {

template <typename Block, typename Apply>
Activations forward_blocks(std::size_t width, const std::vector<Block>& blocks, std::span<const double> x, Apply&& ap) {
  if (x.size() != width)
    throw Error(ErrorKind::invalid_input, "input length " + std::to_string(x.size()) + " does not match width " +
                                              std::to_string(width));
  Activations h(x.begin(), x.end());
  for (const Block& b : blocks) {
    Activations u = ap(b.linear1, h);
    for (double& v : u) v = gelu(v);
    const Activations d = ap(b.linear2, u);
    if (d.size() != h.size()) throw Error(ErrorKind::invalid_input, "block output does not match width");
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += d[i];
  }
  return h;
}

}  // namespace detail

inline Activations forward_dense(const ToyModel& m, std::span<const double> x) {
  return detail::forward_blocks(m.width, m.blocks, x,
                                [](const WeightMatrix& w, std::span<const double> v) { return dense_matvec(w, v); });
}

inline Activations forward_quantized(const QuantizedModel& m, std::span<const double> x) {
  return detail::forward_blocks(m.width, m.blocks, x,
                                [](const Linear& l, std::span<const double> v) { return tq::apply(l, v); });
}

/// Weights drawn N(0, 1/fan_in).
inline ToyModel make_random_toy(std::size_t depth, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    WeightMatrix w(rows, cols);
    const double sd = cols == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : w.values()) v = sd * normal(rng);
    return w;
  };
  ToyModel m{width, {}};
  for (std::size_t i = 0; i < depth; ++i) {
    ToyBlock b;
    b.linear1 = draw(4 * width, width);
    b.linear2 = draw(width, 4 * width);
    m.blocks.push_back(std::move(b));
  }
  return m;
}

/// Weights exactly s_r * T with T ternary (at least one nonzero per row) and
/// s_r of the form m * 2^-e, m in {1, 1.25, 1.5, 1.75}: exact in bf16, f32 and
/// f64, so stored weights are exactly representable.
inline ToyModel make_representable_toy(std::size_t depth, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> code(-1, 1);
  std::uniform_int_distribution<int> mant(0, 3);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    WeightMatrix w(rows, cols);
    const int exponent = 1 + static_cast<int>(std::ceil(0.5 * std::log2(static_cast<double>(std::max<std::size_t>(cols, 1)))));
    for (std::size_t r = 0; r < rows; ++r) {
      const double s = std::ldexp(1.0 + 0.25 * mant(rng), -exponent);
      bool any = false;
      for (std::size_t c = 0; c < cols; ++c) {
        const int t = code(rng);
        any = any || t != 0;
        w(r, c) = s * t;
      }
      if (!any && cols > 0) w(r, 0) = s;
    }
    return w;
  };
  ToyModel m{width, {}};
  for (std::size_t i = 0; i < depth; ++i) {
    ToyBlock b;
    b.linear1 = draw(4 * width, width);
    b.linear2 = draw(width, 4 * width);
    m.blocks.push_back(std::move(b));
  }
  return m;
}

inline TensorMap to_tensors(const ToyModel& m, unsigned width_bytes = kDefaultBaselineWidth) {
  TensorMap out;
  for (std::size_t i = 0; i < m.depth(); ++i) {
    out.emplace(linear_name(i, 1), DenseTensor::from_matrix(m.blocks[i].linear1, width_bytes));
    out.emplace(linear_name(i, 2), DenseTensor::from_matrix(m.blocks[i].linear2, width_bytes));
  }
  return out;
}

namespace detail {

inline std::optional<std::vector<std::uint64_t>> matrix_shape(const Tensor& t) {
  if (const auto* p = std::get_if<PackedTensor>(&t)) return std::vector<std::uint64_t>{p->rows, p->cols};
  const auto& d = std::get<DenseTensor>(t);
  if (d.shape.size() != 2) return std::nullopt;
  return d.shape;
}

inline Linear to_linear(const Tensor& t) {
  if (const auto* p = std::get_if<PackedTensor>(&t)) return *p;
  return std::get<DenseTensor>(t).to_matrix();
}

}  // namespace detail

/// Number of toy blocks found in `tensors`, or nullopt when the block.{i}
/// linears are absent, non-contiguous or do not chain.
inline std::optional<std::size_t> toy_depth(const TensorMap& tensors) {
  std::size_t depth = 0;
  std::optional<std::uint64_t> width;
  while (true) {
    auto l1 = tensors.find(linear_name(depth, 1));
    auto l2 = tensors.find(linear_name(depth, 2));
    if (l1 == tensors.end() && l2 == tensors.end()) break;
    if (l1 == tensors.end() || l2 == tensors.end()) return std::nullopt;
    const auto s1 = detail::matrix_shape(l1->second);
    const auto s2 = detail::matrix_shape(l2->second);
    if (!s1 || !s2) return std::nullopt;
    // linear1: hidden x width, linear2: width x hidden
    if ((*s1)[0] != (*s2)[1] || (*s1)[1] != (*s2)[0]) return std::nullopt;
    if (width && *width != (*s1)[1]) return std::nullopt;
    width = (*s1)[1];
    ++depth;
  }
  if (depth == 0) return std::nullopt;
  return depth;
}

inline QuantizedModel model_from_tensors(const TensorMap& tensors) {
  const auto depth = toy_depth(tensors);
  if (!depth) throw Error(ErrorKind::invalid_input, "tensors do not form a block.{i}.linear{1,2} stack");
  QuantizedModel m;
  for (std::size_t i = 0; i < *depth; ++i) {
    QuantizedBlock b{detail::to_linear(tensors.at(linear_name(i, 1))), detail::to_linear(tensors.at(linear_name(i, 2)))};
    m.blocks.push_back(std::move(b));
  }
  m.width = (*detail::matrix_shape(tensors.at(linear_name(0, 1))))[1];
  return m;
}

inline ToyModel dense_model_from_tensors(const TensorMap& tensors) {
  const auto depth = toy_depth(tensors);
  if (!depth) throw Error(ErrorKind::invalid_input, "tensors do not form a block.{i}.linear{1,2} stack");
  ToyModel m;
  for (std::size_t i = 0; i < *depth; ++i) {
    const Tensor& t1 = tensors.at(linear_name(i, 1));
    const Tensor& t2 = tensors.at(linear_name(i, 2));
    if (!std::holds_alternative<DenseTensor>(t1) || !std::holds_alternative<DenseTensor>(t2))
      throw Error(ErrorKind::invalid_input, "block " + std::to_string(i) + " is not full precision");
    m.blocks.push_back({std::get<DenseTensor>(t1).to_matrix(), std::get<DenseTensor>(t2).to_matrix()});
  }
  m.width = m.blocks.front().linear1.cols();
  return m;
}

inline double relative_error(std::span<const double> approx, std::span<const double> exact) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = approx[i] - exact[i];
    num += d * d;
    den += exact[i] * exact[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

struct WeightMemoryReport {
  std::uint64_t packed_payload_bytes = 0;
  std::uint64_t scale_bytes = 0;
  std::uint64_t passthrough_bytes = 0;
  std::uint64_t dense_baseline_bytes = 0;
  CompressionReport compression;

  std::uint64_t stored_bytes() const noexcept { return packed_payload_bytes + scale_bytes + passthrough_bytes; }
  double ratio() const noexcept { return compression.ratio(); }

  static constexpr const char* caveat =
      "weight-resident bytes only; runtime activation and workspace memory are excluded";
};

/// Both maps must describe the same architecture (names and parameter counts).
inline WeightMemoryReport weight_memory_report(const TensorMap& packed, const TensorMap& dense,
                                               unsigned baseline_width = kDefaultBaselineWidth) {
  if (packed.size() != dense.size()) throw Error(ErrorKind::invalid_input, "models differ in tensor count");
  for (auto a = packed.begin(), b = dense.begin(); a != packed.end(); ++a, ++b)
    if (a->first != b->first || tensor_params(a->second) != tensor_params(b->second))
      throw Error(ErrorKind::invalid_input, "models differ at tensor '" + a->first + "'");

  WeightMemoryReport r;
  r.compression = compression_report(packed, baseline_width);
  r.packed_payload_bytes = r.compression.packed_payload_bytes;
  r.scale_bytes = r.compression.scale_bytes;
  r.passthrough_bytes = r.compression.passthrough_bytes;
  r.dense_baseline_bytes = compression_report(dense, baseline_width).baseline_bytes();
  return r;
}

}  // namespace tq
