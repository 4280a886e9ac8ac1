#pragma once

// Checkpoint-level quantization: select layers by name, ternarize them,
// optionally calibrate their scales, and pack them. Unselected tensors pass
// through untouched.

#include <algorithm>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tq/bitpack.hpp"
#include "tq/calib.hpp"
#include "tq/checkpoint.hpp"
#include "tq/ternary.hpp"
#include "tq/toy_model.hpp"

namespace tq {

struct LayerOutcome {
  std::string name;
  double objective_before = 0.0;  // absmean scales
  double objective_after = 0.0;   // after calibration rounds
  bool calibrated = false;
};

struct QuantizeResult {
  TensorMap tensors;
  std::vector<LayerOutcome> layers;
  std::vector<std::string> notes;
};

/// Teacher-propagated inputs for every linear of a toy block stack: linear1
/// sees the residual stream entering its block, linear2 sees gelu(linear1 h).
inline std::map<std::string, CalibSampleSet> teacher_activations(const ToyModel& m, std::size_t count,
                                                                 std::uint64_t seed) {
  const CalibSampleSet inputs = CalibSampleSet::standard_normal(count, m.width, fork_seed(seed, "model.input"));
  std::map<std::string, CalibSampleSet> out;
  for (std::size_t i = 0; i < m.depth(); ++i) {
    out[linear_name(i, 1)].inputs.reserve(count);
    out[linear_name(i, 2)].inputs.reserve(count);
  }
  for (const Activations& x : inputs.inputs) {
    Activations h = x;
    for (std::size_t i = 0; i < m.depth(); ++i) {
      out[linear_name(i, 1)].inputs.push_back(h);
      Activations u = dense_matvec(m.blocks[i].linear1, h);
      for (double& v : u) v = gelu(v);
      out[linear_name(i, 2)].inputs.push_back(u);
      const Activations d = dense_matvec(m.blocks[i].linear2, u);
      for (std::size_t k = 0; k < h.size(); ++k) h[k] += d[k];
    }
  }
  return out;
}

/// Per-layer work is independent; `workers` only changes scheduling, never
/// results, since every layer draws from its own forked seed.
inline QuantizeResult quantize_tensors(const TensorMap& input, const QuantConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  const LayerPattern pattern(cfg.layer_pattern);
  QuantizeResult result;

  std::vector<std::string> selected;
  for (const auto& [name, tensor] : input) {
    if (!pattern.matches(name)) {
      result.tensors.emplace(name, tensor);
      continue;
    }
    const auto* dense = std::get_if<DenseTensor>(&tensor);
    if (dense == nullptr) {
      result.tensors.emplace(name, tensor);
      result.notes.push_back("'" + name + "' is already packed; kept as is");
    } else if (dense->shape.size() != 2) {
      result.tensors.emplace(name, tensor);
      result.notes.push_back("'" + name + "' matches the pattern but is not a matrix; kept at full precision");
    } else {
      selected.push_back(name);
    }
  }

  const bool calibrate = cfg.calib_samples > 0 && cfg.calib_rounds > 0;
  std::map<std::string, CalibSampleSet> teacher;
  if (calibrate) {
    if (toy_depth(input)) {
      bool all_dense = true;
      for (const auto& [name, t] : input)
        if (name.rfind("block.", 0) == 0 && std::holds_alternative<PackedTensor>(t)) all_dense = false;
      if (all_dense) teacher = teacher_activations(dense_model_from_tensors(input), cfg.calib_samples, cfg.seed);
    }
  }

  std::vector<std::optional<std::pair<Tensor, LayerOutcome>>> done(selected.size());
  auto work = [&](std::size_t i) {
    const std::string& name = selected[i];
    const WeightMatrix w = std::get<DenseTensor>(input.at(name)).to_matrix();
    LayerOutcome outcome{name};
    TernaryTensor t;
    if (calibrate) {
      auto it = teacher.find(name);
      const CalibSampleSet samples = it != teacher.end()
                                         ? it->second
                                         : CalibSampleSet::standard_normal(cfg.calib_samples, w.cols(),
                                                                           fork_seed(cfg.seed, name));
      CalibResult r = alternate_rounds(w, cfg, samples);
      outcome.objective_before = r.initial_objective;
      outcome.objective_after = r.final_objective();
      outcome.calibrated = true;
      t = std::move(r.tensor);
    } else {
      t = ternarize(w, cfg);
    }
    done[i].emplace(pack(t), outcome);
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(selected.size(), 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < selected.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    for (unsigned k = 0; k < workers; ++k) {
      pool.emplace_back([&, k] {
        try {
          for (std::size_t i = k; i < selected.size(); i += workers) work(i);
        } catch (...) {
          failures[k] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  for (std::size_t i = 0; i < selected.size(); ++i) {
    result.tensors.emplace(selected[i], std::move(done[i]->first));
    result.layers.push_back(std::move(done[i]->second));
  }
  return result;
}

}  // namespace tq
