#pragma once

// Fixed-workload latency comparison of the packed kernel paths against a
// dense bf16 baseline. Measures only; never ranks the paths.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tq/bitpack.hpp"
#include "tq/error.hpp"
#include "tq/kernel.hpp"
#include "tq/ternary.hpp"

namespace tq {

enum class BenchPath { reference, lut, dense_baseline };

inline std::string to_string(BenchPath path) {
  switch (path) {
    case BenchPath::reference: return "reference";
    case BenchPath::lut: return "lut";
    case BenchPath::dense_baseline: return "dense-baseline";
  }
  return "unknown";
}

inline BenchPath parse_bench_path(std::string_view text) {
  if (text == "reference") return BenchPath::reference;
  if (text == "lut") return BenchPath::lut;
  if (text == "dense" || text == "dense-baseline") return BenchPath::dense_baseline;
  throw Error(ErrorKind::config, "unknown bench path '" + std::string(text) + "'");
}

struct BenchEntry {
  BenchPath path;
  double median_ns = 0.0;
  double min_ns = 0.0;
  std::uint64_t weight_bytes = 0;
};

struct BenchReport {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t repetitions = 0;
  std::vector<BenchEntry> entries;
};

inline std::uint64_t packed_weight_bytes(std::size_t rows, std::size_t cols, Granularity g = Granularity::per_row) {
  return packed_size_bytes(rows, cols) + scale_count(g, rows) * sizeof(float);
}

inline std::uint64_t dense_weight_bytes(std::size_t rows, std::size_t cols, unsigned real_width = 2) {
  return static_cast<std::uint64_t>(rows) * cols * real_width;
}

inline BenchReport bench_gemv(std::size_t rows, std::size_t cols, std::size_t repetitions,
                              const std::vector<BenchPath>& paths = {BenchPath::reference, BenchPath::lut,
                                                                     BenchPath::dense_baseline},
                              std::uint64_t seed = 42) {
  if (repetitions < 1) throw Error(ErrorKind::config, "bench needs at least one repetition");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WeightMatrix w(rows, cols);
  for (double& v : w.values()) v = normal(rng);
  Activations x(cols);
  for (double& v : x) v = normal(rng);

  const PackedTensor packed = pack(ternarize(w));
  const DenseBf16Matrix dense = DenseBf16Matrix::from(w);

  BenchReport report{rows, cols, repetitions, {}};
  volatile double sink = 0.0;
  for (BenchPath path : paths) {
    std::vector<double> samples;
    samples.reserve(repetitions);
    for (std::size_t i = 0; i < repetitions; ++i) {
      const auto start = std::chrono::steady_clock::now();
      Activations y;
      switch (path) {
        case BenchPath::reference: y = gemv_reference(packed, x); break;
        case BenchPath::lut: y = gemv_lut(packed, x); break;
        case BenchPath::dense_baseline: y = gemv_dense(dense, x); break;
      }
      const auto stop = std::chrono::steady_clock::now();
      if (!y.empty()) sink = sink + y[0];
      samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    BenchEntry entry{path};
    entry.min_ns = samples.front();
    entry.median_ns = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    entry.weight_bytes = path == BenchPath::dense_baseline ? dense.weight_bytes()
                                                           : packed.bytes.size() + packed.scale_bytes();
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace tq
