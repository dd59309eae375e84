#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qbias/bitstream.hpp"

namespace qbias {

/// Probabilities over a shared index set; sums to 1 within 1e-12.
class DiscreteDistribution {
 public:
  /// Throws Domain on negative/non-finite entries or a sum off by more than 1e-12.
  explicit DiscreteDistribution(std::vector<double> probs);
  /// Divides non-negative weights by their sum. Throws Domain if the sum is 0.
  static DiscreteDistribution normalize(std::span<const double> weights);
  static DiscreteDistribution uniform(std::size_t size);
  /// (p0, 1 - p0)
  static DiscreteDistribution bernoulli_zero(double zero_prob);

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }

 private:
  std::vector<double> probs_;
};

/// sqrt(sum (sqrt(q1) - sqrt(q2))^2 / 2), in [0, 1]. Throws Domain on size mismatch.
double hellinger(const DiscreteDistribution& q1, const DiscreteDistribution& q2);

enum TestFlag : unsigned {
  kFlagNone = 0,
  kFlagSmallSample = 1U << 0,  // normal approximation used below 50 samples
  kFlagDegenerate = 1U << 1,   // statistic undefined; reported as failed with p = 0
};

struct TestResult {
  std::string name;
  double statistic = 0.0;  // NaN when degenerate
  double p_value = 1.0;
  double alpha = 0.05;
  bool passed = true;  // p_value > alpha
  unsigned flags = kFlagNone;

  /// 1 - p rounded to four decimals ("confidence level" of a rejection).
  double confidence() const;
};

TestResult make_result(std::string name, double statistic, double p_value, double alpha, unsigned flags = kFlagNone);

struct HellingerSummary {
  double mean = 0.0;
  double std = 0.0;  // population std over qubits
};

/// Mean and std over qubits of H((p_n(0), p_n(1)), (1/2, 1/2)).
HellingerSummary qubit_hellinger_summary(const BitProbabilityReport& report);

/// One-dof chi^2 against equal expected counts. Throws Domain when both counts are 0.
TestResult chi_squared_uniform_bits(std::uint64_t zero_count, std::uint64_t one_count, double alpha = 0.05);

/// Wald-Wolfowitz runs test, normal approximation, two tailed.
/// Throws Degenerate for sequences whose run count has zero variance (constant input).
TestResult runs_test(const RunCounts& counts, double alpha = 0.05);
TestResult runs_test(const BitStream& bits, double alpha = 0.05);

struct PerQubitRuns {
  std::vector<TestResult> per_qubit;
  TestResult whole;
  std::size_t failures() const;
};

/// Runs test on every b_n plus the whole stream. Degenerate qubits are flagged, not thrown.
PerQubitRuns per_qubit_runs(const BitStream& stream, double alpha = 0.05);
PerQubitRuns per_qubit_runs(const BitTally& tally, double alpha = 0.05);

/// Frequency (monobit) test: p = erfc(|#1 - #0| / sqrt(2M)). Throws Domain below 100 bits.
TestResult monobit_frequency_test(std::uint64_t zero_count, std::uint64_t one_count, double alpha = 0.05);
TestResult monobit_frequency_test(const BitStream& bits, double alpha = 0.05);

/// {test, statistic, p_value, alpha, passed, flags[, confidence]}
nlohmann::json to_json(const TestResult& result);

}  // namespace qbias
