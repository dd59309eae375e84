#include "qbias/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qbias/error.hpp"
#include "qbias/special.hpp"

namespace qbias {

namespace {

constexpr std::uint64_t kRunsSmallSample = 50;
constexpr std::uint64_t kMonobitMinBits = 100;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::Domain, "significance level must lie in (0, 1)");
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) fail(ErrorKind::Domain, "distribution needs at least one outcome");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::Domain, "probabilities must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) fail(ErrorKind::Domain, "probabilities do not sum to 1");
}

DiscreteDistribution DiscreteDistribution::normalize(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::Domain, "weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) fail(ErrorKind::Domain, "cannot normalize zero total weight");
  std::vector<double> probs(weights.begin(), weights.end());
  for (double& p : probs) p /= sum;
  // absorb rounding so the 1e-12 invariant always holds
  const double residual = 1.0 - std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(residual) > 1e-12) {
    for (double& p : probs) p /= (1.0 - residual);
  }
  return DiscreteDistribution(std::move(probs));
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t size) {
  if (size == 0) fail(ErrorKind::Domain, "distribution needs at least one outcome");
  std::vector<double> ones(size, 1.0);
  return normalize(ones);
}

DiscreteDistribution DiscreteDistribution::bernoulli_zero(double zero_prob) {
  if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) fail(ErrorKind::Domain, "probability outside [0, 1]");
  return DiscreteDistribution({zero_prob, 1.0 - zero_prob});
}

double hellinger(const DiscreteDistribution& q1, const DiscreteDistribution& q2) {
  if (q1.size() != q2.size()) {
    fail(ErrorKind::Domain, "Hellinger distance needs distributions over the same index set");
  }
  const auto a = q1.probs();
  const auto b = q2.probs();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::sqrt(a[i]) - std::sqrt(b[i]);
    sum += d * d;
  }
  return std::min(1.0, std::sqrt(0.5 * sum));
}

double TestResult::confidence() const { return std::round((1.0 - p_value) * 1e4) / 1e4; }

TestResult make_result(std::string name, double statistic, double p_value, double alpha, unsigned flags) {
  TestResult r;
  r.name = std::move(name);
  r.statistic = statistic;
  r.p_value = std::clamp(p_value, 0.0, 1.0);
  r.alpha = alpha;
  r.flags = flags;
  r.passed = r.p_value > alpha;
  return r;
}

HellingerSummary qubit_hellinger_summary(const BitProbabilityReport& report) {
  if (report.per_qubit.empty()) fail(ErrorKind::Domain, "empty bit probability report");
  const auto uniform = DiscreteDistribution::uniform(2);
  std::vector<double> h;
  h.reserve(report.per_qubit.size());
  for (double p0 : report.per_qubit) h.push_back(hellinger(DiscreteDistribution::bernoulli_zero(p0), uniform));
  const double n = static_cast<double>(h.size());
  HellingerSummary s;
  s.mean = std::accumulate(h.begin(), h.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : h) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  return s;
}

TestResult chi_squared_uniform_bits(std::uint64_t zero_count, std::uint64_t one_count, double alpha) {
  check_alpha(alpha);
  const std::uint64_t total = zero_count + one_count;
  if (total == 0) fail(ErrorKind::Domain, "chi-squared test needs at least one bit");
  const double expected = 0.5 * static_cast<double>(total);
  const double d0 = static_cast<double>(zero_count) - expected;
  const double d1 = static_cast<double>(one_count) - expected;
  const double stat = (d0 * d0 + d1 * d1) / expected;
  return make_result("chi_squared_uniform", stat, special::chi_squared_sf(stat, 1.0), alpha);
}

TestResult runs_test(const RunCounts& counts, double alpha) {
  check_alpha(alpha);
  const double n0 = static_cast<double>(counts.zeros);
  const double n1 = static_cast<double>(counts.ones);
  const double n = n0 + n1;
  if (counts.zeros == 0 || counts.ones == 0) {
    fail(ErrorKind::Degenerate, "runs test needs at least one 0 and one 1");
  }
  const double two_n0n1 = 2.0 * n0 * n1;
  const double mean = two_n0n1 / n + 1.0;
  const double variance = two_n0n1 * (two_n0n1 - n) / (n * n * (n - 1.0));
  if (!(variance > 0.0)) fail(ErrorKind::Degenerate, "runs test variance is zero");
  const double z = (static_cast<double>(counts.runs) - mean) / std::sqrt(variance);
  const unsigned flags = counts.length() < kRunsSmallSample ? kFlagSmallSample : kFlagNone;
  return make_result("runs", z, special::normal_two_tailed(z), alpha, flags);
}

TestResult runs_test(const BitStream& bits, double alpha) {
  BitTally tally(1);
  tally.feed(bits);
  return runs_test(tally.whole(), alpha);
}

std::size_t PerQubitRuns::failures() const {
  std::size_t n = 0;
  for (const auto& r : per_qubit) n += r.passed ? 0 : 1;
  return n;
}

namespace {

TestResult runs_or_degenerate(const RunCounts& counts, double alpha) {
  try {
    return runs_test(counts, alpha);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Degenerate) throw;
    return make_result("runs", std::numeric_limits<double>::quiet_NaN(), 0.0, alpha, kFlagDegenerate);
  }
}

}  // namespace

PerQubitRuns per_qubit_runs(const BitTally& tally, double alpha) {
  check_alpha(alpha);
  PerQubitRuns out;
  out.per_qubit.reserve(tally.num_qubits());
  for (const auto& q : tally.per_qubit()) out.per_qubit.push_back(runs_or_degenerate(q, alpha));
  out.whole = runs_or_degenerate(tally.whole(), alpha);
  return out;
}

PerQubitRuns per_qubit_runs(const BitStream& stream, double alpha) {
  const StreamLayout& layout = stream.require_layout();
  BitTally tally(layout.num_qubits);
  tally.feed(stream);
  return per_qubit_runs(tally, alpha);
}

TestResult monobit_frequency_test(std::uint64_t zero_count, std::uint64_t one_count, double alpha) {
  check_alpha(alpha);
  const std::uint64_t total = zero_count + one_count;
  if (total < kMonobitMinBits) {
    fail(ErrorKind::Domain, "monobit test needs at least 100 bits, got " + std::to_string(total));
  }
  const double s = std::abs(static_cast<double>(one_count) - static_cast<double>(zero_count));
  const double m = static_cast<double>(total);
  const double s_obs = s / std::sqrt(m);
  return make_result("monobit_frequency", s_obs, std::erfc(s / std::sqrt(2.0 * m)), alpha);
}

TestResult monobit_frequency_test(const BitStream& bits, double alpha) {
  return monobit_frequency_test(bits.count_zeros(), bits.count_ones(), alpha);
}

nlohmann::json to_json(const TestResult& result) {
  nlohmann::json flags = nlohmann::json::array();
  if (result.flags & kFlagSmallSample) flags.push_back("small_sample");
  if (result.flags & kFlagDegenerate) flags.push_back("degenerate");
  nlohmann::json j;
  j["test"] = result.name;
  j["statistic"] = std::isfinite(result.statistic) ? nlohmann::json(result.statistic) : nlohmann::json(nullptr);
  j["p_value"] = result.p_value;
  j["alpha"] = result.alpha;
  j["passed"] = result.passed;
  j["flags"] = std::move(flags);
  j["confidence"] = result.confidence();
  return j;
}

}  // namespace qbias
