#pragma once

// Data-free scale calibration. The full-precision layer is the teacher and
// the ternary layer the student; with codes fixed, each row scale is refit to
// the closed-form least-squares minimizer of the layer-output error over a
// set of synthetic (or teacher-propagated) inputs.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tq/error.hpp"
#include "tq/kernel.hpp"
#include "tq/ternary.hpp"

namespace tq {

inline constexpr double kRefitDenominatorEpsilon = 1e-20;

constexpr std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) noexcept {
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Per-layer stream seed; independent of the order layers are processed in.
constexpr std::uint64_t fork_seed(std::uint64_t master, std::string_view stream) noexcept {
  return splitmix64(master ^ fnv1a64(stream));
}

/// Folds a prompt list into the master seed. Prompts are not interpreted.
inline std::uint64_t seed_with_prompts(std::uint64_t master, std::span<const std::string> prompts) {
  std::uint64_t h = splitmix64(master);
  for (const std::string& p : prompts) h = splitmix64(h ^ fnv1a64(p));
  return h;
}

struct CalibSampleSet {
  std::vector<Activations> inputs;

  std::size_t count() const noexcept { return inputs.size(); }
  bool empty() const noexcept { return inputs.empty(); }

  static CalibSampleSet standard_normal(std::size_t count, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CalibSampleSet set;
    set.inputs.assign(count, Activations(dim));
    for (Activations& x : set.inputs)
      for (double& v : x) v = normal(rng);
    return set;
  }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double code_dot(const TernaryTensor& t, std::size_t r, std::span<const double> x) {
  double acc = 0.0;
  const std::int8_t* codes = t.codes.data() + r * t.cols;
  for (std::size_t c = 0; c < t.cols; ++c) acc += static_cast<double>(codes[c]) * x[c];
  return acc;
}

inline void check_samples(const WeightMatrix& w, const TernaryTensor& t, const CalibSampleSet& samples) {
  if (w.rows() != t.rows || w.cols() != t.cols)
    throw Error(ErrorKind::invalid_input, "weights and ternary tensor shapes differ");
  if (samples.empty()) throw Error(ErrorKind::invalid_input, "calibration needs at least one sample");
  for (const Activations& x : samples.inputs) {
    if (x.size() != w.cols()) throw Error(ErrorKind::invalid_input, "calibration sample length does not match columns");
    for (double v : x)
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "non-finite calibration sample");
  }
}

}  // namespace detail

/// Mean over samples and rows of (w_r . x - s_r * T_r . x)^2.
inline double layer_output_mse(const WeightMatrix& w, const TernaryTensor& t, const CalibSampleSet& samples) {
  detail::check_samples(w, t, samples);
  if (w.rows() == 0) return 0.0;
  double sq = 0.0;
  for (const Activations& x : samples.inputs) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = detail::dot(w.row(r), x) - t.scale_of(r) * detail::code_dot(t, r, x);
      sq += d * d;
    }
  }
  return sq / static_cast<double>(samples.count() * w.rows());
}

/// Codes stay fixed. A group whose denominator is below epsilon, or whose
/// minimizer is not positive, keeps its incoming scale.
inline TernaryTensor refit_scales(const WeightMatrix& w, const TernaryTensor& t, const CalibSampleSet& samples,
                                  double denominator_epsilon = kRefitDenominatorEpsilon) {
  detail::check_samples(w, t, samples);
  const std::size_t groups = scale_count(t.granularity, t.rows);
  std::vector<double> num(groups, 0.0);
  std::vector<double> den(groups, 0.0);
  for (const Activations& x : samples.inputs) {
    for (std::size_t r = 0; r < t.rows; ++r) {
      const std::size_t g = t.granularity == Granularity::per_row ? r : 0;
      const double student = detail::code_dot(t, r, x);
      num[g] += student * detail::dot(w.row(r), x);
      den[g] += student * student;
    }
  }
  TernaryTensor out = t;
  for (std::size_t g = 0; g < groups; ++g) {
    if (den[g] < denominator_epsilon) continue;
    const double s = num[g] / den[g];
    if (s > 0.0 && std::isfinite(s)) out.scales[g] = s;
  }
  return out;
}

struct CalibRound {
  double after_reassign = 0.0;
  double after_refit = 0.0;
};

struct CalibResult {
  TernaryTensor tensor;
  double initial_objective = 0.0;
  std::vector<CalibRound> rounds;

  double final_objective() const noexcept { return rounds.empty() ? initial_objective : rounds.back().after_refit; }
};

/// rounds = 0 is plain ternarize. Each round reassigns codes under the current
/// scales, then refits the scales. Objectives are mean layer-output MSE.
inline CalibResult alternate_rounds(const WeightMatrix& w, const QuantConfig& cfg, const CalibSampleSet& samples) {
  CalibResult result{ternarize(w, cfg), 0.0, {}};
  if (samples.empty()) {
    if (cfg.calib_rounds > 0) throw Error(ErrorKind::invalid_input, "calibration rounds need at least one sample");
    return result;
  }
  result.initial_objective = layer_output_mse(w, result.tensor, samples);
  for (std::size_t round = 0; round < cfg.calib_rounds; ++round) {
    CalibRound trace;
    result.tensor = assign_codes(w, result.tensor.granularity, result.tensor.scales);
    trace.after_reassign = layer_output_mse(w, result.tensor, samples);
    result.tensor = refit_scales(w, result.tensor, samples);
    trace.after_refit = layer_output_mse(w, result.tensor, samples);
    result.rounds.push_back(trace);
  }
  return result;
}

struct LayerSelection {
  std::vector<std::string> quantize;
  std::vector<std::string> passthrough;
};

/// Full-name ECMAScript regex match. An empty pattern selects nothing.
class LayerPattern {
 public:
  explicit LayerPattern(std::string pattern) : text_(std::move(pattern)) {
    if (text_.empty()) return;
    try {
      regex_.emplace(text_, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::config, "invalid layer pattern '" + text_ + "': " + e.what());
    }
  }

  bool matches(const std::string& name) const { return regex_ && std::regex_match(name, *regex_); }
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
  std::optional<std::regex> regex_;
};

inline LayerSelection select_layers(std::span<const std::string> names, const std::string& pattern) {
  const LayerPattern re(pattern);
  LayerSelection sel;
  for (const std::string& name : names) (re.matches(name) ? sel.quantize : sel.passthrough).push_back(name);
  return sel;
}

struct ManifestEntry {
  std::string name;
  std::uint64_t params = 0;
};

inline double quantized_fraction(std::span<const ManifestEntry> manifest, const std::string& pattern) {
  const LayerPattern re(pattern);
  std::uint64_t total = 0;
  std::uint64_t matched = 0;
  for (const ManifestEntry& e : manifest) {
    total += e.params;
    if (re.matches(e.name)) matched += e.params;
  }
  return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace tq
