#pragma once

// Random generators and brute-force oracles shared by the test suites. The
// oracles recompute results from first principles and never call the code
// paths they are used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "tq/tq.hpp"

namespace tq::testing {

inline WeightMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  WeightMatrix w(rows, cols);
  for (double& v : w.values()) v = normal(rng);
  return w;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Scales are f32-representable so they survive packing unchanged.
inline TernaryTensor random_ternary(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                    Granularity g = Granularity::per_row) {
  std::uniform_int_distribution<int> code(-1, 1);
  std::uniform_real_distribution<float> scale(0.01f, 4.0f);
  TernaryTensor t;
  t.rows = rows;
  t.cols = cols;
  t.granularity = g;
  t.codes.resize(rows * cols);
  for (auto& c : t.codes) c = static_cast<std::int8_t>(code(rng));
  t.scales.resize(scale_count(g, rows));
  for (auto& s : t.scales) s = static_cast<double>(scale(rng));
  return t;
}

inline double oracle_mean_abs(std::span<const double> xs) {
  long double sum = 0;
  for (double v : xs) sum += std::fabs(v);
  return static_cast<double>(sum / xs.size());
}

inline int oracle_round_clamp(double q) {
  const double mag = std::floor(std::fabs(q) + 0.5);
  int r = static_cast<int>(q < 0 ? -mag : mag);
  if (r > 1) r = 1;
  if (r < -1) r = -1;
  return r;
}

/// y = (scale * codes) x, accumulated in long double.
inline std::vector<double> oracle_dense_matvec(const TernaryTensor& t, std::span<const double> x) {
  std::vector<double> y(t.rows);
  for (std::size_t r = 0; r < t.rows; ++r) {
    const double s = t.granularity == Granularity::per_row ? t.scales[r] : t.scales[0];
    long double acc = 0;
    for (std::size_t c = 0; c < t.cols; ++c) acc += static_cast<long double>(s * t.codes[r * t.cols + c]) * x[c];
    y[r] = static_cast<double>(acc);
  }
  return y;
}

inline std::vector<double> oracle_matvec(const WeightMatrix& w, std::span<const double> x) {
  std::vector<double> y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    long double acc = 0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += static_cast<long double>(w(r, c)) * x[c];
    y[r] = static_cast<double>(acc);
  }
  return y;
}

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tq-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace tq::testing
