#pragma once

// Desk-scale training harness: RNG sources under test, He-uniform weight
// initialization, a 2 -> H -> 2 ReLU network on a two-blob task, and batch
// experiments that produce one RunMatrix per source.
//
// Only the weight initialization draws from the source under test. Data,
// shuffling and everything else use an auxiliary generator keyed by
// (base_seed, run_index), so two experiments that differ only in the source
// see identical datasets and batch orders.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbias/bitstream.hpp"
#include "qbias/compare.hpp"
#include "qbias/random.hpp"

namespace qbias {

/// Default success probability p(1) of the biased source: 1 - 0.5112.
inline constexpr double kDefaultBiasedOneProb = 1.0 - 0.5112;

/// Stream of C-bit integers (default 32) and uniforms value / (2^C - 1).
class RngSource {
 public:
  enum class Kind { PrngUnbiased, PrngBiased, FileSequence };

  static RngSource prng_unbiased(std::string label, std::uint64_t seed, unsigned word_bits = 32);
  /// `one_prob` is the Bernoulli success probability p(1) of every bit.
  static RngSource prng_biased(std::string label, double one_prob, std::uint64_t seed, unsigned word_bits = 32);
  /// Integers taken in order, unshuffled, from a bit file; no wraparound.
  static RngSource file_sequence(std::string label, const std::filesystem::path& path, unsigned word_bits = 32,
                                 std::optional<BitFormat> format = std::nullopt);
  /// In-memory fixed sequence with file-sequence semantics.
  static RngSource from_bits(std::string label, BitStream bits, unsigned word_bits = 32);

  RngSource(RngSource&&) noexcept;
  RngSource& operator=(RngSource&&) noexcept;
  ~RngSource();

  Kind kind() const noexcept;
  const std::string& label() const noexcept;
  std::string description() const;
  unsigned word_bits() const noexcept;

  /// Next integer in [0, 2^C - 1]. Throws Exhausted for a spent file sequence.
  std::uint64_t next_integer();
  /// next_integer() / (2^C - 1), in [0, 1].
  double next_uniform();

  std::uint64_t consumed() const noexcept;
  /// Integers left in a fixed sequence; nullopt for generators.
  std::optional<std::uint64_t> remaining() const noexcept;

 private:
  struct State;
  explicit RngSource(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

/// Parses `label=kind[:key=value]...` where kind is prng (seed), biased (p, seed)
/// or file (path, format). `index` picks the default seed (index + 1).
RngSource parse_source_spec(std::string_view spec, std::size_t index = 0, unsigned word_bits = 32);
/// Comma-separated list of source specs.
std::vector<RngSource> parse_source_list(std::string_view specs, unsigned word_bits = 32);

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
};

/// sqrt(6 / fan_in)
double he_bound(std::size_t fan_in);

/// fan_out x fan_in matrix, entries bound * (2u - 1); consumes fan_in * fan_out
/// integers in row-major order. Throws Domain if fan_in == 0.
Matrix he_uniform_init(std::size_t fan_in, std::size_t fan_out, RngSource& source);

struct ExperimentConfig {
  std::size_t runs = 31;
  std::size_t epochs = 20;
  std::size_t hidden = 16;
  double learning_rate = 0.02;
  std::size_t batch_size = 25;
  std::size_t train_size = 200;
  std::size_t test_size = 1000;
  double blob_separation = 3.0;  // distance between the two class centers
  double blob_std = 0.6;
  double blob_offset = 2.0;  // both centers shifted by this along (1, 1)/sqrt(2)
  std::uint64_t base_seed = 2021;
  double alpha = 0.05;
  unsigned word_bits = 32;

  /// Throws Usage on invalid values (runs < 2, epochs < 1, zero sizes...).
  void validate() const;
  /// key=value lines, '#' comments; unknown keys are an error.
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig read(const std::filesystem::path& path);
};

struct Sample {
  double x0 = 0.0;
  double x1 = 0.0;
  int label = 0;
};

/// Balanced two-class Gaussian blobs (labels alternate 0, 1, ...).
std::vector<Sample> make_blobs(std::size_t count, const ExperimentConfig& config, Xoshiro256pp& rng);

/// 2 -> hidden (ReLU) -> 2 logits, softmax cross-entropy.
class ToyNetwork {
 public:
  explicit ToyNetwork(std::size_t hidden);
  /// He-uniform for every parameter, drawn in the order W1, b1, W2, b2.
  static ToyNetwork initialize(std::size_t hidden, RngSource& source);

  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  /// Mean loss over the batch; writes d(loss)/d(params) into `grad` when non-empty.
  double loss_and_gradient(std::span<const Sample> batch, std::span<double> grad) const;
  int predict(const Sample& s) const;
  double accuracy(std::span<const Sample> data) const;

  static std::size_t parameter_count_for(std::size_t hidden) noexcept { return 2 * hidden + hidden + 2 * hidden + 2; }

 private:
  void forward(const Sample& s, std::span<double> hidden_act, double logits[2]) const;

  std::size_t hidden_;
  std::vector<double> params_;  // W1 (hidden x 2), b1, W2 (2 x hidden), b2
};

/// Largest relative deviation between analytic and central-difference gradients
/// on a random network and batch, |a - n| / max(|a|, |n|, floor).
double gradient_check(std::size_t hidden, std::size_t batch, std::uint64_t seed, double step = 1e-6,
                      double floor = 1e-6);

/// Trains a freshly initialized network; returns test accuracy after each epoch.
/// Throws Diverged on a non-finite loss, Exhausted from the source.
std::vector<double> train_toy_network(const ExperimentConfig& config, RngSource& source, std::size_t run_index);

/// One RunMatrix per source; every source is consumed sequentially, run 0 first.
std::vector<RunMatrix> run_experiment(const ExperimentConfig& config, std::span<RngSource> sources);

}  // namespace qbias
