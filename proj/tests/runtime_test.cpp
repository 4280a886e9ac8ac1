#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "tq/pipeline.hpp"

using namespace tq;
using tq::testing::TempDir;

namespace {

/// Plain-loop forward, written without any of the library's model code.
Activations oracle_forward(const ToyModel& m, const Activations& x) {
  Activations h = x;
  for (const ToyBlock& b : m.blocks) {
    std::vector<long double> u(b.linear1.rows());
    for (std::size_t r = 0; r < u.size(); ++r) {
      long double acc = 0;
      for (std::size_t c = 0; c < h.size(); ++c) acc += static_cast<long double>(b.linear1(r, c)) * h[c];
      u[r] = 0.5L * acc * (1.0L + std::erf(acc / std::sqrt(2.0L)));
    }
    for (std::size_t r = 0; r < h.size(); ++r) {
      long double acc = 0;
      for (std::size_t c = 0; c < u.size(); ++c) acc += static_cast<long double>(b.linear2(r, c)) * u[c];
      h[r] = static_cast<double>(h[r] + acc);
    }
  }
  return h;
}

QuantizeResult quantize_toy(const ToyModel& m, std::size_t rounds, std::size_t samples = 128) {
  QuantConfig cfg;
  cfg.calib_rounds = rounds;
  cfg.calib_samples = samples;
  return quantize_tensors(to_tensors(m, 8), cfg);
}

double max_forward_error(const ToyModel& teacher, const QuantizedModel& student, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& x : CalibSampleSet::standard_normal(32, teacher.width, seed).inputs)
    worst = std::max(worst, relative_error(forward_quantized(student, x), forward_dense(teacher, x)));
  return worst;
}

}  // namespace

TEST(Forward, DepthZeroIsIdentity) {
  const ToyModel m{5, {}};
  const Activations x{1, -2, 3, 0.5, 0};
  EXPECT_EQ(forward_dense(m, x), x);
  EXPECT_EQ(forward_quantized(QuantizedModel{5, {}}, x), x);
}

TEST(Forward, ZeroWeightsAreIdentity) {
  ToyModel m{3, {{WeightMatrix(12, 3), WeightMatrix(3, 12)}, {WeightMatrix(12, 3), WeightMatrix(3, 12)}}};
  const Activations x{0.25, -1, 4};
  EXPECT_EQ(forward_dense(m, x), x);
}

TEST(Forward, MatchesOracle) {
  const ToyModel m = make_random_toy(2, 8, 3);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Activations x = tq::testing::random_vector(rng, 8);
    const Activations got = forward_dense(m, x);
    const Activations want = oracle_forward(m, x);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(got[k], want[k], 1e-12 * (1 + std::abs(want[k])));
  }
}

TEST(Forward, GeluValues) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
}

TEST(Forward, RejectsWrongWidth) {
  const ToyModel m = make_random_toy(1, 4, 1);
  EXPECT_THROW((void)forward_dense(m, Activations(3)), Error);
}

TEST(Parity, RepresentableToyQuantizesExactly) {
  const ToyModel m = make_representable_toy(4, 64, 7);
  const QuantizeResult q = quantize_toy(m, 1);
  const QuantizedModel student = model_from_tensors(q.tensors);
  EXPECT_LE(max_forward_error(m, student, 11), 1e-9);
  for (const auto& [name, t] : q.tensors) EXPECT_TRUE(std::holds_alternative<PackedTensor>(t)) << name;
}

TEST(Parity, CalibrationDoesNotHurt) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ToyModel m = make_random_toy(2, 16, seed);
    const double plain = max_forward_error(m, model_from_tensors(quantize_toy(m, 0).tensors), 99);
    const double calibrated = max_forward_error(m, model_from_tensors(quantize_toy(m, 2).tensors), 99);
    EXPECT_LE(calibrated, plain) << seed;
    const ToyModel r = make_representable_toy(2, 16, seed);
    EXPECT_LE(max_forward_error(r, model_from_tensors(quantize_toy(r, 1).tensors), 99),
              max_forward_error(r, model_from_tensors(quantize_toy(r, 0).tensors), 99));
  }
}

TEST(Pipeline, WorkersDoNotChangeResults) {
  const ToyModel m = make_random_toy(3, 8, 4);
  QuantConfig cfg;
  cfg.calib_rounds = 2;
  cfg.calib_samples = 16;
  const QuantizeResult one = quantize_tensors(to_tensors(m), cfg, 1);
  const QuantizeResult four = quantize_tensors(to_tensors(m), cfg, 4);
  EXPECT_EQ(one.tensors, four.tensors);
}

TEST(Pipeline, PassthroughAndNotes) {
  TensorMap in = to_tensors(make_random_toy(1, 4, 2));
  in.emplace("block.0.linear_bias", DenseTensor::from_values({4}, std::vector<double>{1, 2, 3, 4}));
  in.emplace("embed", DenseTensor::from_values({2, 4}, std::vector<double>(8, 0.5)));
  const QuantizeResult q = quantize_tensors(in, QuantConfig{});
  EXPECT_TRUE(std::holds_alternative<PackedTensor>(q.tensors.at("block.0.linear1")));
  EXPECT_EQ(q.tensors.at("embed"), in.at("embed"));
  EXPECT_EQ(q.tensors.at("block.0.linear_bias"), in.at("block.0.linear_bias"));
  EXPECT_EQ(q.notes.size(), 1u);
  EXPECT_EQ(q.layers.size(), 2u);
}

TEST(Compression, EstimateExamples) {
  EXPECT_NEAR(estimate_compression(1e9, 0.995, 2, 16, 0), 16.0 / (0.995 * 2 + 0.005 * 16), 1e-12);
  EXPECT_NEAR(estimate_compression(1e9, 0.995, 2, 16, 0), 7.73, 0.01);
  EXPECT_EQ(estimate_compression(1e9, 0.0, 2, 16, 0), 1.0);
  EXPECT_EQ(estimate_compression(1e9, 1.0, 2, 16, 0), 8.0);
  EXPECT_NEAR(estimate_compression(1e9, 0.995, 2, 16, per_row_scale_overhead_bits(3072)), 7.69, 0.01);
  EXPECT_THROW((void)estimate_compression(1, 1.5, 2, 16, 0), Error);
}

TEST(Compression, EstimateMonotone) {
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = estimate_compression(1, i / 100.0, 2, 16, 0.01);
    EXPECT_GT(r, prev);
    prev = r;
  }
  EXPECT_GT(estimate_compression(1, 0.9, 2, 16, 0.0), estimate_compression(1, 0.9, 2, 16, 0.5));
}

TEST(WeightMemory, ToyReportMatchesCheckpointExactly) {
  const ToyModel m = make_random_toy(4, 64, 1);
  const TensorMap dense = to_tensors(m);
  const QuantizeResult q = quantize_toy(m, 0);
  const WeightMemoryReport r = weight_memory_report(q.tensors, dense);

  const std::uint64_t params = 4ull * 2 * 256 * 64;
  EXPECT_EQ(r.dense_baseline_bytes, params * 2);
  EXPECT_EQ(r.packed_payload_bytes, params / 4);
  EXPECT_EQ(r.scale_bytes, 4ull * (256 + 64) * 4);
  EXPECT_EQ(r.passthrough_bytes, 0u);
  const double oracle = static_cast<double>(params * 2) / (params / 4 + 4.0 * (256 + 64) * 4);
  EXPECT_DOUBLE_EQ(r.ratio(), oracle);
  EXPECT_NE(std::string(WeightMemoryReport::caveat).find("activation"), std::string::npos);

  TempDir dir;
  write_checkpoint(q.tensors, dir / "q.tqck");
  EXPECT_EQ(checkpoint_stats(dir / "q.tqck"), r.compression);
  EXPECT_EQ(checkpoint_stats(dir / "q.tqck").ratio(), r.ratio());
}

TEST(WeightMemory, NothingQuantizedIsOne) {
  const TensorMap dense = to_tensors(make_random_toy(2, 8, 1));
  EXPECT_EQ(weight_memory_report(dense, dense).ratio(), 1.0);
}

TEST(WeightMemory, MoreQuantizedLayersShrinkStorage) {
  const ToyModel m = make_random_toy(4, 16, 6);
  const TensorMap dense = to_tensors(m);
  std::uint64_t prev = compression_report(dense).stored_bytes();
  for (std::size_t k = 1; k <= 4; ++k) {
    QuantConfig cfg;
    cfg.calib_rounds = 0;
    std::string alt;
    for (std::size_t i = 0; i < k; ++i) alt += (i ? "|" : "") + std::to_string(i);
    cfg.layer_pattern = "block\\.(" + alt + ")\\.linear.";
    const WeightMemoryReport r = weight_memory_report(quantize_tensors(dense, cfg).tensors, dense);
    EXPECT_LT(r.stored_bytes(), prev);
    EXPECT_EQ(r.dense_baseline_bytes, compression_report(dense).baseline_bytes());
    prev = r.stored_bytes();
  }
}

TEST(WeightMemory, ArchitectureMismatch) {
  const TensorMap a = to_tensors(make_random_toy(2, 8, 1));
  const TensorMap b = to_tensors(make_random_toy(2, 4, 1));
  EXPECT_THROW((void)weight_memory_report(a, b), Error);
}
