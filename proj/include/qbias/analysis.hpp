#pragma once

// File-level pipelines behind the CLI: bit statistics, integer histograms,
// theory curves and experiment output directories. Bit files are streamed in
// BitFileReader::kBufferBytes chunks, so memory stays bounded for
// paper-scale (3e8 bit) inputs.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "qbias/bitstream.hpp"
#include "qbias/compare.hpp"
#include "qbias/integers.hpp"
#include "qbias/stats.hpp"
#include "qbias/toytrain.hpp"

namespace qbias {

struct BitAnalysis {
  StreamLayout layout;  // (1, M, 1) when the input has none
  bool layout_inferred = false;
  std::uint64_t total_bits = 0;
  std::vector<RunCounts> per_qubit_counts;
  BitProbabilityReport probabilities;
  HellingerSummary hellinger;
  TestResult chi_squared;
  std::optional<TestResult> monobit;  // skipped below 100 bits
  PerQubitRuns runs;
  double alpha = 0.05;
};

BitAnalysis analyze_bits(const BitStream& stream, double alpha = 0.05);
/// Throws Length for an empty file.
BitAnalysis analyze_bit_file(const std::filesystem::path& path, std::optional<BitFormat> format = std::nullopt,
                             std::optional<StreamLayout> layout = std::nullopt, double alpha = 0.05);

nlohmann::json to_json(const BitAnalysis& analysis);
/// qubit,zeros,ones,p0,p1,hellinger,runs_statistic,runs_p_value,runs_passed,flags
void write_per_qubit_csv(std::ostream& out, const BitAnalysis& analysis);

struct IntAnalysis {
  unsigned word_bits = 32;
  std::uint64_t discarded_bits = 0;  // trailing bits that did not fill a word
  IntegerHistogram measured;
  double hellinger_uniform = 0.0;
  std::optional<double> theory_p;
  std::optional<IntegerHistogram> theory;
  std::optional<double> hellinger_theory;          // measured vs theory
  std::optional<double> theory_hellinger_uniform;  // theory vs uniform
};

/// `theory_p` is the single-bit success probability p(1) of the overlay model.
IntAnalysis analyze_integers(const BitStream& stream, unsigned word_bits, std::uint32_t num_bins,
                             std::optional<double> theory_p = std::nullopt);
IntAnalysis analyze_int_file(const std::filesystem::path& path, unsigned word_bits, std::uint32_t num_bins,
                             std::optional<double> theory_p = std::nullopt,
                             std::optional<BitFormat> format = std::nullopt);
nlohmann::json to_json(const IntAnalysis& analysis);
void write_csv(std::ostream& out, const IntAnalysis& analysis);

/// Hellinger distance of a (measured or theoretical) histogram to the uniform 1/K.
double hellinger_to_uniform(const IntegerHistogram& histogram);

struct TheoryReport {
  double p = 0.5;
  unsigned word_bits = 32;
  IntegerHistogram histogram;
  double hellinger_uniform = 0.0;
  double mass = 0.0;  // sum of bin populations, equals total up to rounding
};

TheoryReport theory_report(double p, unsigned word_bits, std::uint32_t num_bins, std::uint64_t total);
nlohmann::json to_json(const TheoryReport& report);

struct ExperimentOutcome {
  std::vector<RunMatrix> matrices;
  ComparisonSummary summary;
  std::vector<std::uint64_t> consumed;  // integers drawn per source
};

/// Runs the experiment and writes `<label>.csv` per source plus
/// `comparison.csv` and `comparison.json` into `out_dir` (created if needed).
ExperimentOutcome run_experiment_to_dir(const ExperimentConfig& config, std::span<RngSource> sources,
                                        const std::filesystem::path& out_dir);
nlohmann::json to_json(const ExperimentOutcome& outcome, const ExperimentConfig& config);

}  // namespace qbias
