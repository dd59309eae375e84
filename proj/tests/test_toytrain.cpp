#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "qbias/bitstream.hpp"
#include "qbias/compare.hpp"
#include "qbias/error.hpp"
#include "qbias/integers.hpp"
#include "qbias/toytrain.hpp"
#include "test_util.hpp"

using namespace qbias;
using qbias::testing::TempDir;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.runs = 3;
  c.epochs = 5;
  return c;
}

}  // namespace

TEST(RngSource, UniformsCoverUnitInterval) {
  auto s = RngSource::prng_unbiased("u", 1, 8);
  double lo = 1, hi = 0;
  for (int i = 0; i < 5000; ++i) {
    const double u = s.next_uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LE(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
  EXPECT_EQ(s.consumed(), 5000u);
  EXPECT_FALSE(s.remaining());
}

TEST(RngSource, GeneratorMatchesBitStreamModel) {
  // the biased generator is the scalar Bernoulli stream read as C-bit integers
  const double p1 = 0.4888;
  auto s = RngSource::prng_biased("b", p1, 9, 32);
  const auto bits = generate_bits(QubitBiasProfile::scalar(1.0 - p1), StreamLayout{1, 32 * 3000, 1}, 9);
  const auto ints = bits_to_integers(bits, 32);
  for (std::size_t j = 0; j < ints.values.size(); ++j) ASSERT_EQ(s.next_integer(), ints.values[j]) << j;
}

TEST(RngSource, BiasedMeanFollowsTheory) {
  // E[I] = p * (2^C - 1) for i.i.d. bits, so E[I / xi] = p(1)
  auto s = RngSource::prng_biased("b", kDefaultBiasedOneProb, 4);
  const int n = 1000000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += s.next_uniform();
  const double mean = sum / n;
  EXPECT_LT(mean, 0.5);
  EXPECT_NEAR(mean, kDefaultBiasedOneProb, 4 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngSource, FileSequenceIsContiguousAndExhausts) {
  TempDir dir;
  const auto bits = generate_bits(QubitBiasProfile::scalar(0.5), StreamLayout{1, 32 * 10 + 5, 1}, 3);
  write_bitfile(bits, dir / "q.bin", BitFormat::Packed);
  auto s = RngSource::file_sequence("q", dir / "q.bin");
  const auto ints = bits_to_integers(bits, 32);
  EXPECT_EQ(s.remaining(), 10u);
  for (auto v : ints.values) EXPECT_EQ(s.next_integer(), v);
  EXPECT_EQ(s.remaining(), 0u);
  EXPECT_QBIAS_ERROR(s.next_integer(), ErrorKind::Exhausted);
}

TEST(SourceSpec, ParsesKindsAndDefaults) {
  TempDir dir;
  write_bitfile(generate_bits(QubitBiasProfile::scalar(0.5), StreamLayout{1, 640, 1}, 1), dir / "f.txt",
                BitFormat::Ascii);
  auto list = parse_source_list("a=prng,b=biased:p=0.3:seed=9,c=file:path=" + (dir / "f.txt").string());
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list[0].kind(), RngSource::Kind::PrngUnbiased);
  EXPECT_EQ(list[1].kind(), RngSource::Kind::PrngBiased);
  EXPECT_EQ(list[2].kind(), RngSource::Kind::FileSequence);
  EXPECT_EQ(list[2].remaining(), 20u);

  // default seed is index + 1
  auto first = parse_source_spec("x=prng", 0);
  auto explicit_seed = RngSource::prng_unbiased("x", 1);
  EXPECT_EQ(first.next_integer(), explicit_seed.next_integer());

  EXPECT_QBIAS_ERROR(parse_source_spec("noequals"), ErrorKind::Usage);
  EXPECT_QBIAS_ERROR(parse_source_spec("a=laser"), ErrorKind::Usage);
  EXPECT_QBIAS_ERROR(parse_source_spec("a=biased:p=2"), ErrorKind::Domain);
  EXPECT_QBIAS_ERROR(parse_source_spec("a=file"), ErrorKind::Usage);
  EXPECT_QBIAS_ERROR(parse_source_list("a=prng,a=biased"), ErrorKind::Usage);
}

TEST(HeUniform, BoundsAndConsumption) {
  auto s = RngSource::prng_unbiased("u", 5);
  const auto m = he_uniform_init(4, 3, s);
  EXPECT_EQ(m.rows, 3u);
  EXPECT_EQ(m.cols, 4u);
  EXPECT_EQ(s.consumed(), 12u);
  EXPECT_DOUBLE_EQ(he_bound(4), std::sqrt(6.0 / 4.0));
  for (double w : m.data) {
    EXPECT_LE(std::fabs(w), he_bound(4));
  }
  EXPECT_QBIAS_ERROR(he_uniform_init(0, 3, s), ErrorKind::Domain);
}

TEST(HeUniform, UnbiasedMeanNearZeroBiasedMeanNegative) {
  const std::size_t n = 100000;
  auto u = RngSource::prng_unbiased("u", 6);
  const auto mu = he_uniform_init(n, 1, u);
  const double bound = he_bound(n);
  const double mean_u = std::accumulate(mu.data.begin(), mu.data.end(), 0.0) / n;
  EXPECT_LT(std::fabs(mean_u), 4 * bound / std::sqrt(3.0 * n));

  auto b = RngSource::prng_biased("b", kDefaultBiasedOneProb, 6);
  const auto mb = he_uniform_init(n, 1, b);
  const double mean_b = std::accumulate(mb.data.begin(), mb.data.end(), 0.0) / n;
  EXPECT_LT(mean_b, 0.0);
  // bound * (2 p(1) - 1) from the mean integer p * xi
  EXPECT_NEAR(mean_b, bound * (2 * kDefaultBiasedOneProb - 1), 4 * bound / std::sqrt(3.0 * n));
}

TEST(ToyNetwork, ParameterCountAndInitializationOrder) {
  EXPECT_EQ(ToyNetwork::parameter_count_for(16), 82u);
  auto s = RngSource::prng_unbiased("u", 2);
  const auto net = ToyNetwork::initialize(16, s);
  EXPECT_EQ(net.parameter_count(), 82u);
  EXPECT_EQ(s.consumed(), 82u);

  auto t = RngSource::prng_unbiased("u", 2);
  std::vector<double> expected;
  auto take = [&](std::size_t fan_in, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) expected.push_back(he_bound(fan_in) * (2 * t.next_uniform() - 1));
  };
  take(2, 32);   // W1
  take(2, 16);   // b1
  take(16, 32);  // W2
  take(16, 2);   // b2
  const auto p = net.parameters();
  EXPECT_EQ(std::vector<double>(p.begin(), p.end()), expected);
}

TEST(ToyNetwork, GradientCheck) {
  for (std::uint64_t seed : {1u, 2u, 3u}) EXPECT_LT(gradient_check(16, 25, seed), 1e-5) << seed;
  EXPECT_LT(gradient_check(3, 7, 4), 1e-5);
}

TEST(ExperimentConfig, ParsesKeyValueFile) {
  std::istringstream in("# toy\nruns = 4\nepochs=7\nlearning_rate=0.05\n\nbase_seed=9\n");
  const auto c = ExperimentConfig::parse(in);
  EXPECT_EQ(c.runs, 4u);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.05);
  EXPECT_EQ(c.base_seed, 9u);
  EXPECT_EQ(c.hidden, 16u);
  std::istringstream bad("runs=4\nbogus=1\n");
  EXPECT_QBIAS_ERROR(ExperimentConfig::parse(bad), ErrorKind::Usage);
  std::istringstream one_run("runs=1\n");
  EXPECT_QBIAS_ERROR(ExperimentConfig::parse(one_run), ErrorKind::Usage);
}

TEST(Training, DefaultTaskReachesHighAccuracy) {
  ExperimentConfig c;
  auto s = RngSource::prng_unbiased("u", 1);
  double final_sum = 0;
  for (std::size_t run = 0; run < 5; ++run) {
    const auto acc = train_toy_network(c, s, run);
    ASSERT_EQ(acc.size(), c.epochs);
    for (double a : acc) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
    final_sum += acc.back();
  }
  EXPECT_GE(final_sum / 5, 0.95);
}

TEST(Training, DeterministicGivenSourceStateAndRun) {
  const auto c = small_config();
  auto a = RngSource::prng_unbiased("a", 3);
  auto b = RngSource::prng_unbiased("b", 3);
  EXPECT_EQ(train_toy_network(c, a, 2), train_toy_network(c, b, 2));
}

TEST(Training, ConsumesOneIntegerPerParameterPerRun) {
  TempDir dir;
  auto c = small_config();
  write_bitfile(generate_bits(QubitBiasProfile::scalar(0.5), StreamLayout{1, 32 * 82 * 3, 1}, 5), dir / "f.bin",
                BitFormat::Packed);
  std::vector<RngSource> sources;
  sources.push_back(RngSource::file_sequence("f", dir / "f.bin"));
  const auto ms = run_experiment(c, sources);
  EXPECT_EQ(sources[0].consumed(), 3u * 82u);
  EXPECT_EQ(sources[0].remaining(), 0u);
  EXPECT_EQ(ms[0].runs(), 3u);
}

TEST(Training, FileSourceTooShortIsExhausted) {
  TempDir dir;
  write_bitfile(generate_bits(QubitBiasProfile::scalar(0.5), StreamLayout{1, 32 * 100, 1}, 5), dir / "f.bin",
                BitFormat::Packed);
  std::vector<RngSource> sources;
  sources.push_back(RngSource::file_sequence("f", dir / "f.bin"));
  EXPECT_QBIAS_ERROR(run_experiment(small_config(), sources), ErrorKind::Exhausted);
}

TEST(Experiment, IdenticalSourcesGiveIdenticalMatrices) {
  const auto c = small_config();
  std::vector<RngSource> sources;
  sources.push_back(RngSource::prng_unbiased("a", 11));
  sources.push_back(RngSource::prng_unbiased("b", 11));
  const auto ms = run_experiment(c, sources);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(std::vector<double>(ms[0].values().begin(), ms[0].values().end()),
            std::vector<double>(ms[1].values().begin(), ms[1].values().end()));
  const auto s = compare_all(ms, c.alpha);
  EXPECT_TRUE(s.no_significant_difference);
  EXPECT_EQ(s.min_adjusted_p, 1.0);
}

TEST(Blobs, BalancedAndReproducible) {
  ExperimentConfig c;
  Xoshiro256pp r1(derive_key(1, 2)), r2(derive_key(1, 2));
  const auto a = make_blobs(100, c, r1), b = make_blobs(100, c, r2);
  int ones = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x0, b[i].x0);
    EXPECT_EQ(a[i].label, static_cast<int>(i % 2));
    ones += a[i].label;
  }
  EXPECT_EQ(ones, 50);
}
