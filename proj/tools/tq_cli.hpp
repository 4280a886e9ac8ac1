#pragma once

// Command-line front end. run_cli() is the whole program minus process
// plumbing so tests can drive it in-process.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 I/O or format error,
// 3 internal invariant violation, 4 verification exceeded its tolerance.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tq/tq.hpp"

namespace tq::cli {

enum ExitCode : int { ok = 0, config_error = 1, format_error = 2, internal_error = 3, verify_failed = 4 };

enum class Format { human, json_lines };

namespace detail {

inline std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string shape_text(const std::vector<std::uint64_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s.empty() ? "scalar" : s;
}

inline nlohmann::json report_json(const CompressionReport& r) {
  return {{"type", "report"},
          {"total_params", r.total_params},
          {"quantized_params", r.quantized_params},
          {"passthrough_params", r.passthrough_params},
          {"quantized_fraction", r.quantized_fraction()},
          {"packed_payload_bytes", r.packed_payload_bytes},
          {"scale_bytes", r.scale_bytes},
          {"passthrough_bytes", r.passthrough_bytes},
          {"baseline_width", r.baseline_width},
          {"baseline_bytes", r.baseline_bytes()},
          {"stored_bytes", r.stored_bytes()},
          {"ratio", r.ratio()}};
}

inline void print_report(std::ostream& out, const CompressionReport& r, Format format) {
  if (format == Format::json_lines) {
    out << report_json(r).dump() << '\n';
    return;
  }
  out << "total params         " << r.total_params << '\n'
      << "quantized params     " << r.quantized_params << " (fraction " << fixed(r.quantized_fraction(), 6) << ")\n"
      << "passthrough params   " << r.passthrough_params << '\n'
      << "packed payload bytes " << r.packed_payload_bytes << '\n'
      << "scale bytes          " << r.scale_bytes << '\n'
      << "passthrough bytes    " << r.passthrough_bytes << '\n'
      << "baseline bytes       " << r.baseline_bytes() << " (" << r.baseline_width << " bytes/param)\n"
      << "stored bytes         " << r.stored_bytes() << '\n'
      << "compression ratio    " << fixed(r.ratio(), 4) << "x\n";
}

inline Format parse_format(const std::string& text) {
  if (text == "human") return Format::human;
  if (text == "json-lines" || text == "jsonl") return Format::json_lines;
  throw Error(ErrorKind::config, "unknown format '" + text + "' (expected human or json-lines)");
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TQ_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::config, "TQ_SEED is not an unsigned integer");
  }
  return 42;
}

inline TensorMap load_input(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return import_dense_directory(path);
  return read_checkpoint(path);
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open prompt file '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

inline std::pair<std::size_t, std::size_t> parse_shape(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t a = 0;
    std::size_t b = 0;
    const auto rows = std::stoull(text.substr(0, x), &a);
    const auto cols = std::stoull(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1) throw std::invalid_argument("trailing characters");
    return {rows, cols};
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "shape must look like ROWSxCOLS, got '" + text + "'");
  }
}

struct QuantizeArgs {
  std::string input;
  std::string output;
  std::string pattern = QuantConfig{}.layer_pattern;
  std::string granularity = "per-row";
  std::size_t calib_samples = QuantConfig{}.calib_samples;
  std::size_t calib_rounds = QuantConfig{}.calib_rounds;
  std::optional<std::uint64_t> seed;
  std::string prompts;
  std::string format = "human";
  unsigned workers = 1;
};

struct VerifyArgs {
  std::string original;
  std::string quantized;
  std::size_t samples = 32;
  double tolerance = 1e-6;
  std::optional<std::uint64_t> seed;
  std::string format = "human";
};

struct InspectArgs {
  std::string input;
  std::string format = "human";
  unsigned baseline_width = kDefaultBaselineWidth;
};

struct BenchArgs {
  std::string shape = "256x256";
  std::size_t reps = 20;
  std::vector<std::string> paths = {"reference", "lut", "dense"};
  std::optional<std::uint64_t> seed;
  std::string format = "human";
};

struct ToyArgs {
  std::string output;
  std::size_t depth = 4;
  std::size_t width = 64;
  std::optional<std::uint64_t> seed;
  bool representable = false;
  unsigned width_bytes = kDefaultBaselineWidth;
};

inline int cmd_quantize(const QuantizeArgs& a, std::ostream& out, std::ostream& err) {
  QuantConfig cfg;
  cfg.layer_pattern = a.pattern;
  cfg.granularity = parse_granularity(a.granularity);
  cfg.calib_samples = a.calib_samples;
  cfg.calib_rounds = a.calib_rounds;
  cfg.seed = resolve_seed(a.seed);
  const Format format = parse_format(a.format);
  (void)LayerPattern(cfg.layer_pattern);  // reject bad patterns before touching files
  if (!a.prompts.empty()) {
    const auto prompts = read_lines(a.prompts);
    cfg.seed = seed_with_prompts(cfg.seed, prompts);
    err << "folded " << prompts.size() << " prompts into the calibration seed\n";
  }

  const TensorMap input = load_input(a.input);
  const QuantizeResult result = quantize_tensors(input, cfg, a.workers);
  for (const std::string& note : result.notes) err << "note: " << note << '\n';
  write_checkpoint(result.tensors, a.output);

  const CompressionReport report = checkpoint_stats(a.output);
  if (format == Format::json_lines) {
    for (const LayerOutcome& l : result.layers) {
      nlohmann::json j = {{"type", "layer"}, {"name", l.name}, {"calibrated", l.calibrated}};
      if (l.calibrated) {
        j["objective_before"] = l.objective_before;
        j["objective_after"] = l.objective_after;
      }
      out << j.dump() << '\n';
    }
  } else {
    out << "quantized " << result.layers.size() << " of " << input.size() << " tensors (pattern '" << a.pattern
        << "')\n";
    for (const LayerOutcome& l : result.layers) {
      out << "  " << l.name;
      if (l.calibrated)
        out << "  output mse " << std::scientific << std::setprecision(3) << l.objective_before << " -> "
            << l.objective_after << std::defaultfloat;
      out << '\n';
    }
  }
  print_report(out, report, format);
  return ok;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const Format format = parse_format(a.format);
  if (a.samples == 0) throw Error(ErrorKind::config, "--samples must be at least 1");
  if (!(a.tolerance >= 0.0)) throw Error(ErrorKind::config, "--tolerance must be non-negative");
  const std::uint64_t seed = resolve_seed(a.seed);

  const TensorMap original = read_checkpoint(a.original);
  const TensorMap quantized = read_checkpoint(a.quantized);

  auto shape_of = [](const Tensor& t) {
    if (const auto* p = std::get_if<PackedTensor>(&t)) return std::vector<std::uint64_t>{p->rows, p->cols};
    return std::get<DenseTensor>(t).shape;
  };
  for (const auto& [name, t] : original) {
    auto it = quantized.find(name);
    if (it == quantized.end() || shape_of(it->second) != shape_of(t)) {
      err << "architecture mismatch at tensor '" << name << "'\n";
      return format_error;
    }
  }
  for (const auto& [name, t] : quantized)
    if (!original.contains(name)) {
      err << "architecture mismatch at tensor '" << name << "'\n";
      return format_error;
    }

  std::vector<double> errors;
  if (toy_depth(original)) {
    const ToyModel teacher = dense_model_from_tensors(original);
    const QuantizedModel student = model_from_tensors(quantized);
    const auto inputs = CalibSampleSet::standard_normal(a.samples, teacher.width, fork_seed(seed, "verify.input"));
    for (const Activations& x : inputs.inputs)
      errors.push_back(relative_error(forward_quantized(student, x), forward_dense(teacher, x)));
  } else {
    // No block stack: compare every matrix layer on its own.
    for (const auto& [name, t] : original) {
      const auto* d = std::get_if<DenseTensor>(&t);
      if (d == nullptr || d->shape.size() != 2) continue;
      const WeightMatrix w = d->to_matrix();
      const Linear q = tq::detail::to_linear(quantized.at(name));
      const auto inputs = CalibSampleSet::standard_normal(a.samples, w.cols(), fork_seed(seed, "verify." + name));
      for (const Activations& x : inputs.inputs) errors.push_back(relative_error(tq::apply(q, x), dense_matvec(w, x)));
    }
  }

  double max_err = 0.0;
  double sum = 0.0;
  for (double e : errors) {
    max_err = std::max(max_err, e);
    sum += e;
  }
  const double mean_err = errors.empty() ? 0.0 : sum / static_cast<double>(errors.size());
  const bool pass = max_err <= a.tolerance;
  if (format == Format::json_lines) {
    out << nlohmann::json{{"type", "verify"},         {"samples", errors.size()}, {"max_relative_error", max_err},
                          {"mean_relative_error", mean_err}, {"tolerance", a.tolerance}, {"pass", pass}}
               .dump()
        << '\n';
  } else {
    out << "evaluations          " << errors.size() << '\n'
        << "max relative error   " << std::scientific << std::setprecision(6) << max_err << '\n'
        << "mean relative error  " << mean_err << '\n'
        << "tolerance            " << a.tolerance << std::defaultfloat << '\n'
        << (pass ? "PASS" : "FAIL") << '\n';
  }
  if (!pass) err << "max relative error exceeds tolerance\n";
  return pass ? ok : verify_failed;
}

inline int cmd_inspect(const InspectArgs& a, std::ostream& out, std::ostream&) {
  const Format format = parse_format(a.format);
  const CheckpointReader reader(a.input);
  const CompressionReport report = checkpoint_stats(a.input, a.baseline_width);
  if (format == Format::json_lines) {
    for (const TensorRecord& r : reader.records()) {
      nlohmann::json j = {{"type", "record"},
                          {"name", r.name},
                          {"encoding", to_string(r.encoding)},
                          {"shape", r.shape},
                          {"params", r.numel()},
                          {"data_offset", r.data_offset},
                          {"data_length", r.data_length}};
      if (r.encoding == Encoding::packed_ternary) {
        j["granularity"] = to_string(r.granularity);
        j["scale_offset"] = r.scale_offset;
        j["scale_length"] = r.scale_length;
      } else {
        j["width"] = r.width;
      }
      out << j.dump() << '\n';
    }
  } else {
    out << "TQCK version " << reader.version() << ", " << reader.records().size() << " records, "
        << reader.file_size() << " bytes\n";
    out << std::left << std::setw(28) << "name" << std::setw(16) << "encoding" << std::setw(14) << "shape"
        << std::setw(12) << "layout" << std::right << std::setw(12) << "data-bytes" << std::setw(13) << "scale-bytes"
        << '\n';
    for (const TensorRecord& r : reader.records()) {
      const std::string layout =
          r.encoding == Encoding::packed_ternary ? to_string(r.granularity) : (r.width == 2 ? "bf16" : r.width == 4 ? "f32" : "f64");
      out << std::left << std::setw(28) << r.name << std::setw(16) << to_string(r.encoding) << std::setw(14)
          << shape_text(r.shape) << std::setw(12) << layout << std::right << std::setw(12) << r.data_length
          << std::setw(13) << r.scale_length << '\n';
    }
    out << std::left;
  }
  print_report(out, report, format);
  return ok;
}

inline int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
  const Format format = parse_format(a.format);
  const auto [rows, cols] = parse_shape(a.shape);
  if (a.reps < 1) throw Error(ErrorKind::config, "--reps must be at least 1");
  std::vector<BenchPath> paths;
  for (const std::string& p : a.paths) paths.push_back(parse_bench_path(p));
  const BenchReport report = bench_gemv(rows, cols, a.reps, paths, resolve_seed(a.seed));
  if (format == Format::json_lines) {
    for (const BenchEntry& e : report.entries)
      out << nlohmann::json{{"type", "bench"},       {"path", to_string(e.path)}, {"rows", report.rows},
                            {"cols", report.cols},   {"reps", report.repetitions}, {"median_ns", e.median_ns},
                            {"min_ns", e.min_ns},    {"weight_bytes", e.weight_bytes}}
                 .dump()
          << '\n';
    return ok;
  }
  out << "gemv " << rows << "x" << cols << ", " << a.reps << " repetitions\n";
  out << std::left << std::setw(16) << "path" << std::right << std::setw(14) << "median-ns" << std::setw(14) << "min-ns"
      << std::setw(14) << "weight-bytes" << '\n';
  for (const BenchEntry& e : report.entries)
    out << std::left << std::setw(16) << to_string(e.path) << std::right << std::setw(14) << fixed(e.median_ns, 0)
        << std::setw(14) << fixed(e.min_ns, 0) << std::setw(14) << e.weight_bytes << '\n';
  out << std::left;
  return ok;
}

inline int cmd_toy(const ToyArgs& a, std::ostream& out, std::ostream&) {
  if (!is_supported_width(a.width_bytes)) throw Error(ErrorKind::config, "--width-bytes must be 2, 4 or 8");
  const std::uint64_t seed = resolve_seed(a.seed);
  const ToyModel m = a.representable ? make_representable_toy(a.depth, a.width, seed)
                                     : make_random_toy(a.depth, a.width, seed);
  write_checkpoint(to_tensors(m, a.width_bytes), a.output);
  out << "wrote " << (a.representable ? "representable" : "random") << " toy model (depth " << a.depth << ", width "
      << a.width << ") to " << a.output << '\n';
  return ok;
}

}  // namespace detail

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return config_error;
    case ErrorKind::invalid_code: return internal_error;
    default: return format_error;
  }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ternary weight quantization toolkit", "tq"};
  app.require_subcommand(1);

  detail::QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Quantize matching layers of a dense checkpoint");
  quantize->add_option("--input", qa.input, "Dense TQCK checkpoint or dense-import directory")->required();
  quantize->add_option("--output", qa.output, "Output TQCK checkpoint")->required();
  quantize->add_option("--pattern", qa.pattern, "Regex over tensor names (full match); empty selects nothing");
  quantize->add_option("--granularity", qa.granularity, "per-row or per-tensor");
  quantize->add_option("--calib-samples", qa.calib_samples, "Calibration inputs per layer (0 disables)");
  quantize->add_option("--calib-rounds", qa.calib_rounds, "Code-reassign/refit rounds (0 disables)");
  quantize->add_option("--seed", qa.seed, "Seed (falls back to TQ_SEED, then 42)");
  quantize->add_option("--prompts", qa.prompts, "Prompt list, one per line, hashed into the seed");
  quantize->add_option("--format", qa.format, "human or json-lines");
  quantize->add_option("--workers", qa.workers, "Parallel calibration workers");

  detail::VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Compare dense and quantized forwards on seeded inputs");
  verify->add_option("--original", va.original, "Dense TQCK checkpoint")->required();
  verify->add_option("--quantized", va.quantized, "Quantized TQCK checkpoint")->required();
  verify->add_option("--samples", va.samples, "Number of seeded inputs");
  verify->add_option("--tolerance", va.tolerance, "Maximum allowed relative error");
  verify->add_option("--seed", va.seed, "Seed (falls back to TQ_SEED, then 42)");
  verify->add_option("--format", va.format, "human or json-lines");

  detail::InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Print the record table and compression report");
  inspect->add_option("--input", ia.input, "TQCK checkpoint")->required();
  inspect->add_option("--format", ia.format, "human or json-lines");
  inspect->add_option("--baseline-width", ia.baseline_width, "Bytes per baseline parameter");

  detail::BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time packed and dense gemv paths");
  bench->add_option("--shape", ba.shape, "ROWSxCOLS");
  bench->add_option("--reps", ba.reps, "Repetitions per path");
  bench->add_option("--paths", ba.paths, "Any of reference, lut, dense")->delimiter(',');
  bench->add_option("--seed", ba.seed, "Seed (falls back to TQ_SEED, then 42)");
  bench->add_option("--format", ba.format, "human or json-lines");

  detail::ToyArgs ta;
  auto* toy = app.add_subcommand("toy", "Write a toy block-stack checkpoint");
  toy->add_option("--output", ta.output, "Output TQCK checkpoint")->required();
  toy->add_option("--depth", ta.depth, "Number of blocks");
  toy->add_option("--width", ta.width, "Hidden width");
  toy->add_option("--seed", ta.seed, "Seed (falls back to TQ_SEED, then 42)");
  toy->add_flag("--representable", ta.representable, "Weights exactly scale * ternary");
  toy->add_option("--width-bytes", ta.width_bytes, "Stored element width: 2 (bf16), 4 (f32), 8 (f64)");

  std::vector<const char*> argv;
  argv.push_back("tq");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failing->help();
    return config_error;
  }

  try {
    if (*quantize) return detail::cmd_quantize(qa, out, err);
    if (*verify) return detail::cmd_verify(va, out, err);
    if (*inspect) return detail::cmd_inspect(ia, out, err);
    if (*bench) return detail::cmd_bench(ba, out, err);
    if (*toy) return detail::cmd_toy(ta, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return format_error;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  }
  return internal_error;
}

}  // namespace tq::cli
