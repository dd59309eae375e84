#include "qbias/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "qbias/error.hpp"

namespace qbias {

namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BitAnalysis finish_bit_analysis(const BitTally& tally, const StreamLayout& layout, bool inferred, double alpha) {
  BitAnalysis a;
  a.layout = layout;
  a.layout_inferred = inferred;
  a.total_bits = tally.bits_seen();
  a.alpha = alpha;
  a.per_qubit_counts.assign(tally.per_qubit().begin(), tally.per_qubit().end());
  a.probabilities = bit_probabilities_from_tally(tally);
  a.hellinger = qubit_hellinger_summary(a.probabilities);
  a.chi_squared = chi_squared_uniform_bits(tally.whole().zeros, tally.whole().ones, alpha);
  if (a.total_bits >= 100) a.monobit = monobit_frequency_test(tally.whole().zeros, tally.whole().ones, alpha);
  a.runs = per_qubit_runs(tally, alpha);
  return a;
}

}  // namespace

BitAnalysis analyze_bits(const BitStream& stream, double alpha) {
  if (stream.empty()) fail(ErrorKind::Length, "cannot analyze an empty stream");
  const bool inferred = !stream.layout();
  const StreamLayout layout = inferred ? StreamLayout{1, stream.size(), 1} : *stream.layout();
  BitTally tally(layout.num_qubits);
  tally.feed(stream);
  return finish_bit_analysis(tally, layout, inferred, alpha);
}

BitAnalysis analyze_bit_file(const fs::path& path, std::optional<BitFormat> format,
                             std::optional<StreamLayout> layout, double alpha) {
  BitFileReader reader(path, format, layout);
  const std::uint64_t qubits = reader.layout() ? reader.layout()->num_qubits : 1;
  BitTally tally(qubits);
  std::vector<std::uint64_t> chunk(BitFileReader::kBufferBytes / 8);
  while (const auto got = reader.read(chunk)) tally.feed(chunk, got);
  if (tally.bits_seen() == 0) fail(ErrorKind::Length, path.string() + ": no bits");
  const bool inferred = !reader.layout();
  const StreamLayout effective = inferred ? StreamLayout{1, tally.bits_seen(), 1} : *reader.layout();
  if (effective.total_bits() != tally.bits_seen()) {
    fail(ErrorKind::Length, path.string() + ": bit count does not match layout");
  }
  return finish_bit_analysis(tally, effective, inferred, alpha);
}

nlohmann::json to_json(const BitAnalysis& a) {
  nlohmann::json tests = nlohmann::json::array();
  tests.push_back(to_json(a.chi_squared));
  if (a.monobit) tests.push_back(to_json(*a.monobit));
  auto whole = to_json(a.runs.whole);
  whole["test"] = "runs_whole_stream";
  tests.push_back(std::move(whole));

  nlohmann::json per_qubit = nlohmann::json::array();
  for (std::size_t n = 0; n < a.runs.per_qubit.size(); ++n) {
    auto r = to_json(a.runs.per_qubit[n]);
    r["qubit"] = n;
    per_qubit.push_back(std::move(r));
  }
  nlohmann::json skipped = nlohmann::json::array();
  if (!a.monobit) skipped.push_back("monobit_frequency");

  return {{"layout",
           {{"num_qubits", a.layout.num_qubits},
            {"shots_per_experiment", a.layout.shots_per_experiment},
            {"num_experiments", a.layout.num_experiments},
            {"inferred", a.layout_inferred}}},
          {"total_bits", a.total_bits},
          {"zero_probability",
           {{"per_qubit", a.probabilities.per_qubit},
            {"mean", a.probabilities.aggregate_mean},
            {"std", a.probabilities.aggregate_std},
            {"samples_per_qubit", a.probabilities.sample_counts}}},
          {"hellinger_per_qubit", {{"mean", a.hellinger.mean}, {"std", a.hellinger.std}}},
          {"tests", std::move(tests)},
          {"runs_per_qubit", std::move(per_qubit)},
          {"runs_per_qubit_failures", a.runs.failures()},
          {"skipped", std::move(skipped)},
          {"alpha", a.alpha}};
}

void write_per_qubit_csv(std::ostream& out, const BitAnalysis& a) {
  const auto uniform = DiscreteDistribution::uniform(2);
  out << "qubit,zeros,ones,p0,p1,hellinger,runs_statistic,runs_p_value,runs_passed,flags\n";
  for (std::size_t n = 0; n < a.per_qubit_counts.size(); ++n) {
    const auto& c = a.per_qubit_counts[n];
    const double p0 = a.probabilities.per_qubit[n];
    const auto& r = a.runs.per_qubit[n];
    std::string flags;
    if (r.flags & kFlagSmallSample) flags += "small_sample";
    if (r.flags & kFlagDegenerate) flags += flags.empty() ? "degenerate" : ";degenerate";
    out << n << ',' << c.zeros << ',' << c.ones << ',' << g17(p0) << ',' << g17(1.0 - p0) << ','
        << g17(hellinger(DiscreteDistribution::bernoulli_zero(p0), uniform)) << ','
        << (std::isfinite(r.statistic) ? g17(r.statistic) : std::string("nan")) << ',' << g17(r.p_value) << ','
        << (r.passed ? 1 : 0) << ',' << flags << '\n';
  }
}

double hellinger_to_uniform(const IntegerHistogram& histogram) {
  return hellinger(DiscreteDistribution::normalize(histogram.bin_counts),
                   DiscreteDistribution::uniform(histogram.num_bins()));
}

namespace {

IntAnalysis finish_int_analysis(const IntegerBinner& binner, std::uint64_t total_bits, unsigned word_bits,
                                std::uint32_t num_bins, std::optional<double> theory_p) {
  IntAnalysis a;
  a.word_bits = word_bits;
  a.measured = binner.result();
  a.discarded_bits = total_bits - a.measured.total * word_bits;
  if (a.measured.total == 0) fail(ErrorKind::Length, "stream too short for a single integer");
  a.hellinger_uniform = hellinger_to_uniform(a.measured);
  if (theory_p) {
    a.theory_p = theory_p;
    a.theory = theoretical_histogram(*theory_p, word_bits, num_bins, a.measured.total);
    a.hellinger_theory = hellinger(DiscreteDistribution::normalize(a.measured.bin_counts),
                                   DiscreteDistribution::normalize(a.theory->bin_counts));
    a.theory_hellinger_uniform = hellinger_to_uniform(*a.theory);
  }
  return a;
}

}  // namespace

IntAnalysis analyze_integers(const BitStream& stream, unsigned word_bits, std::uint32_t num_bins,
                             std::optional<double> theory_p) {
  IntegerBinner binner(word_bits, num_bins);
  binner.feed(stream);
  return finish_int_analysis(binner, stream.size(), word_bits, num_bins, theory_p);
}

IntAnalysis analyze_int_file(const fs::path& path, unsigned word_bits, std::uint32_t num_bins,
                             std::optional<double> theory_p, std::optional<BitFormat> format) {
  if (theory_p && !(*theory_p >= 0.0 && *theory_p <= 1.0)) {
    fail(ErrorKind::Domain, "theory probability must lie in [0, 1]");
  }
  IntegerBinner binner(word_bits, num_bins);
  BitFileReader reader(path, format);
  std::vector<std::uint64_t> chunk(BitFileReader::kBufferBytes / 8);
  std::uint64_t total = 0;
  while (const auto got = reader.read(chunk)) {
    binner.feed(chunk, got);
    total += got;
  }
  return finish_int_analysis(binner, total, word_bits, num_bins, theory_p);
}

nlohmann::json to_json(const IntAnalysis& a) {
  nlohmann::json j{{"word_bits", a.word_bits},
                   {"bins", a.measured.num_bins()},
                   {"integers", a.measured.total},
                   {"discarded_bits", a.discarded_bits},
                   {"hellinger_uniform", a.hellinger_uniform}};
  if (a.theory_p) {
    j["theory_p"] = *a.theory_p;
    j["hellinger_theory"] = *a.hellinger_theory;
    j["theory_hellinger_uniform"] = *a.theory_hellinger_uniform;
  }
  return j;
}

void write_csv(std::ostream& out, const IntAnalysis& a) {
  write_histogram_csv(out, a.measured, a.theory ? &*a.theory : nullptr);
}

TheoryReport theory_report(double p, unsigned word_bits, std::uint32_t num_bins, std::uint64_t total) {
  if (total == 0) fail(ErrorKind::Domain, "total number of integers must be >= 1");
  TheoryReport r;
  r.p = p;
  r.word_bits = word_bits;
  r.histogram = theoretical_histogram(p, word_bits, num_bins, total);
  r.mass = std::accumulate(r.histogram.bin_counts.begin(), r.histogram.bin_counts.end(), 0.0);
  r.hellinger_uniform = hellinger_to_uniform(r.histogram);
  return r;
}

nlohmann::json to_json(const TheoryReport& r) {
  return {{"p", r.p},
          {"word_bits", r.word_bits},
          {"bins", r.histogram.num_bins()},
          {"total", r.histogram.total},
          {"mass", r.mass},
          {"relative_mass_error",
           std::abs(r.mass - static_cast<double>(r.histogram.total)) / static_cast<double>(r.histogram.total)},
          {"hellinger_uniform", r.hellinger_uniform}};
}

ExperimentOutcome run_experiment_to_dir(const ExperimentConfig& config, std::span<RngSource> sources,
                                        const fs::path& out_dir) {
  for (const auto& s : sources) {
    if (s.label().find_first_of("/\\") != std::string::npos || s.label() == "comparison") {
      fail(ErrorKind::Usage, "source label '" + s.label() + "' cannot be used as a file name");
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  ExperimentOutcome outcome;
  outcome.matrices = run_experiment(config, sources);
  for (const auto& s : sources) outcome.consumed.push_back(s.consumed());
  outcome.summary = compare_all(outcome.matrices, config.alpha);

  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir / name, std::ios::trunc);
    if (!f) fail(ErrorKind::Io, "cannot write " + (out_dir / name).string());
    return f;
  };
  for (const auto& m : outcome.matrices) {
    auto f = open(m.source_label() + ".csv");
    m.write_csv(f);
  }
  {
    auto f = open("comparison.csv");
    write_comparison_csv(f, outcome.summary);
  }
  {
    auto f = open("comparison.json");
    f << to_json(outcome, config).dump(2) << '\n';
  }
  return outcome;
}

nlohmann::json to_json(const ExperimentOutcome& outcome, const ExperimentConfig& config) {
  nlohmann::json sources = nlohmann::json::array();
  for (std::size_t i = 0; i < outcome.matrices.size(); ++i) {
    sources.push_back({{"label", outcome.matrices[i].source_label()},
                       {"integers_consumed", i < outcome.consumed.size() ? outcome.consumed[i] : 0},
                       {"final_epoch_mean", outcome.matrices[i].epoch_means().back()}});
  }
  auto j = to_json(outcome.summary);
  j["runs"] = config.runs;
  j["epochs"] = config.epochs;
  j["sources"] = std::move(sources);
  return j;
}

}  // namespace qbias
