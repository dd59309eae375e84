// Acceptance suite: one PASS/FAIL line per criterion.
//
//   qbias_acceptance          run every criterion
//   qbias_acceptance 3 5      run the listed criteria only
//
// Exit status is 0 only when every selected criterion passes.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "qbias/analysis.hpp"
#include "qbias/bitstream.hpp"
#include "qbias/compare.hpp"
#include "qbias/error.hpp"
#include "qbias/integers.hpp"
#include "qbias/random.hpp"
#include "qbias/stats.hpp"
#include "qbias/toytrain.hpp"

namespace fs = std::filesystem;
using namespace qbias;

namespace {

constexpr double kBiasZeroProb = 0.5112;
constexpr double kBiasOneProb = 1.0 - kBiasZeroProb;
// 65 qubits x 8192 shots x 56 experiments = 29,818,880 bits, the 3e7 desk scale
const StreamLayout kDeskLayout{65, 8192, 56};
const StreamLayout kPaperLayout{65, 8192, 564};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("qbias-acceptance-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// 1. exhaustive oracle

std::uint32_t oracle_bin(std::uint64_t v, std::uint32_t K, unsigned C) {
  const std::uint64_t xi = (std::uint64_t{1} << C) - 1;
  if (v == xi) return K;
  for (std::uint32_t k = 1; k <= K; ++k) {
    if (static_cast<unsigned __int128>(v) * K < static_cast<unsigned __int128>(k) * xi) return k;
  }
  return K;
}

Outcome criterion_1() {
  Stopwatch clock;
  const std::uint64_t total = 1000000;
  double worst_rel = 0.0;
  std::size_t cases = 0, popcount_mismatches = 0;
  for (unsigned C : {4u, 8u, 12u}) {
    for (std::uint32_t K : {1u, 4u, 250u}) {
      for (int step = 0; step <= 10; ++step) {
        const double p = step / 10.0;
        std::vector<long double> brute(K, 0.0L);
        for (std::uint64_t i = 0; i < (std::uint64_t{1} << C); ++i) {
          const int w = std::popcount(i);
          brute[oracle_bin(i, K, C) - 1] += std::pow(static_cast<long double>(p), w) *
                                            std::pow(1.0L - static_cast<long double>(p), static_cast<int>(C) - w);
        }
        const auto h = theoretical_histogram(p, C, K, total);
        for (std::uint32_t k = 0; k < K; ++k) {
          const long double want = brute[k] * total;
          const long double diff = std::fabs(h.bin_counts[k] - want);
          if (want != 0.0L) worst_rel = std::max(worst_rel, static_cast<double>(diff / want));
          else if (diff != 0.0L) worst_rel = INFINITY;
        }
        ++cases;
      }
    }
    std::vector<std::uint64_t> running(C + 1, 0);
    for (std::uint64_t x = 0; x <= (std::uint64_t{1} << C); ++x) {
      for (unsigned w = 0; w <= C; ++w) {
        if (popcount_count_below(x, w, C) != running[w]) ++popcount_mismatches;
      }
      if (x < (std::uint64_t{1} << C)) ++running[std::popcount(x)];
    }
  }
  const double secs = clock.seconds();
  return {worst_rel <= 1e-9 && popcount_mismatches == 0 && secs < 10.0,
          fmt("%zu (C,K,p) cases, max relative error %.3g (<= 1e-9), popcount mismatches %zu, %.2f s (< 10 s)",
              cases, worst_rel, popcount_mismatches, secs)};
}

// ---------------------------------------------------------------------------
// 2-4. bias reproduction and integer distances

struct DeskStreams {
  BitStream biased;
  double biased_gen_seconds = 0.0;
};

const DeskStreams& desk_streams() {
  static const DeskStreams streams = [] {
    DeskStreams s;
    Stopwatch clock;
    s.biased = generate_bits(QubitBiasProfile::scalar(kBiasZeroProb), kDeskLayout, 20210512);
    s.biased_gen_seconds = clock.seconds();
    return s;
  }();
  return streams;
}

Outcome criterion_2() {
  const auto& s = desk_streams();
  Stopwatch clock;
  const auto chi = chi_squared_uniform_bits(s.biased.count_zeros(), s.biased.count_ones());
  const double secs = s.biased_gen_seconds + clock.seconds();
  return {chi.p_value < 1e-4 && secs < 30.0,
          fmt("M = %llu, p(0) = %.5f, chi2 = %.1f, p = %.3g (< 1e-4), confidence %.4f, %.2f s (< 30 s)",
              static_cast<unsigned long long>(s.biased.size()),
              double(s.biased.count_zeros()) / double(s.biased.size()), chi.statistic, chi.p_value, chi.confidence(),
              secs)};
}

Outcome criterion_3() {
  const auto& s = desk_streams();
  Stopwatch clock;
  const auto a = analyze_integers(s.biased, 32, 250, kBiasOneProb);
  const double desk_secs = s.biased_gen_seconds + clock.seconds();
  const double theory = *a.theory_hellinger_uniform;
  const double rel = std::fabs(a.hellinger_uniform - theory) / theory;

  Stopwatch full_clock;
  const auto full_stream = generate_bits(QubitBiasProfile::scalar(kBiasZeroProb), kPaperLayout, 20210513);
  const double full = analyze_integers(full_stream, 32, 250).hellinger_uniform;
  const double full_secs = full_clock.seconds();

  const bool pass = rel <= 0.15 && desk_secs < 60.0 && full >= 0.018 && full <= 0.025;
  return {pass, fmt("L = %llu: H = %.5f vs model %.5f, deviation %.1f%% (<= 15%%), %.2f s (< 60 s); "
                    "full scale L = %llu: H = %.5f in [0.018, 0.025] (%.1f s)",
                    static_cast<unsigned long long>(a.measured.total), a.hellinger_uniform, theory, 100 * rel,
                    desk_secs, static_cast<unsigned long long>(full_stream.size() / 32), full, full_secs)};
}

Outcome criterion_4() {
  const auto unbiased = generate_bits(QubitBiasProfile::scalar(0.5), kDeskLayout, 20210514);
  const auto a = analyze_integers(unbiased, 32, 250);
  const double L = static_cast<double>(a.measured.total);
  // sampling floor of a multinomial histogram against its own expectation
  const double floor = std::sqrt(249.0 / (8.0 * L));
  const auto full = generate_bits(QubitBiasProfile::scalar(0.5), kPaperLayout, 20210515);
  const double full_h = analyze_integers(full, 32, 250).hellinger_uniform;
  return {a.hellinger_uniform < 0.004,
          fmt("L = %.0f: H = %.5f (< 0.004); sampling floor sqrt((K-1)/8L) = %.5f; "
              "at full scale L = %llu: H = %.5f",
              L, a.hellinger_uniform, floor, static_cast<unsigned long long>(full.size() / 32), full_h)};
}

// ---------------------------------------------------------------------------
// 5. battery calibration

Outcome criterion_5() {
  const int streams = 200;
  int chi_rej = 0, runs_rej = 0, mono_rej = 0;
  for (int seed = 1; seed <= streams; ++seed) {
    const auto s = generate_bits(QubitBiasProfile::scalar(0.5), StreamLayout{1, 100000, 1}, seed);
    chi_rej += !chi_squared_uniform_bits(s.count_zeros(), s.count_ones()).passed;
    runs_rej += !runs_test(s).passed;
    mono_rej += !monobit_frequency_test(s).passed;
  }
  const double r_chi = double(chi_rej) / streams, r_runs = double(runs_rej) / streams,
               r_mono = double(mono_rej) / streams;
  auto in_band = [](double r) { return std::fabs(r - 0.05) <= 0.03 + 1e-12; };

  std::vector<std::uint8_t> alternating(100000), blocks(100000), constant(100000, 0);
  for (std::size_t i = 0; i < alternating.size(); ++i) {
    alternating[i] = i & 1;
    blocks[i] = (i / 1000) & 1;
  }
  // smallest p over the battery; a degenerate runs statistic counts as p = 0
  auto battery_min_p = [](const std::vector<std::uint8_t>& bits) {
    const auto s = BitStream::from_bits(bits);
    double p = std::min(chi_squared_uniform_bits(s.count_zeros(), s.count_ones()).p_value,
                        monobit_frequency_test(s).p_value);
    try {
      p = std::min(p, runs_test(s).p_value);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate) throw;
      p = 0.0;
    }
    return p;
  };
  const double p_alt = battery_min_p(alternating), p_blk = battery_min_p(blocks), p_const = battery_min_p(constant);

  const bool pass = in_band(r_chi) && in_band(r_runs) && in_band(r_mono) && p_alt < 1e-6 && p_blk < 1e-6 &&
                    p_const < 1e-6;
  return {pass, fmt("rejection rates over %d streams: chi2 %.3f, runs %.3f, monobit %.3f (each in 0.05 +/- 0.03); "
                    "adversarial min p: alternating %.3g, 1000-bit blocks %.3g, constant %.3g (< 1e-6)",
                    streams, r_chi, r_runs, r_mono, p_alt, p_blk, p_const)};
}

// ---------------------------------------------------------------------------
// 6. comparison machinery

Outcome criterion_6() {
  Xoshiro256pp rng(606);
  double worst_p = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t nx = 5 + rng.below(30), ny = 5 + rng.below(30);
    std::vector<double> x(nx), y(ny);
    const double shift = 0.5 * (rng.uniform() - 0.5), sx = 0.05 + rng.uniform(), sy = 0.05 + 2 * rng.uniform();
    for (auto& v : x) v = sx * rng.normal();
    for (auto& v : y) v = shift + sy * rng.normal();

    long double mx = 0, my = 0, vx = 0, vy = 0;
    for (double v : x) mx += v;
    for (double v : y) my += v;
    mx /= nx;
    my /= ny;
    for (double v : x) vx += (v - mx) * (v - mx);
    for (double v : y) vy += (v - my) * (v - my);
    const long double ax = vx / (nx - 1) / nx, ay = vy / (ny - 1) / ny;
    const double t = static_cast<double>((mx - my) / std::sqrt(ax + ay));
    const double dof = static_cast<double>((ax + ay) * (ax + ay) / (ax * ax / (nx - 1) + ay * ay / (ny - 1)));
    const boost::math::students_t_distribution<double> dist(dof);
    const double ref = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    worst_p = std::max(worst_p, std::fabs(welch_t_test(x, y).p_value - ref));
  }

  struct Triple {
    std::vector<double> raw, adjusted;
  };
  const std::vector<Triple> triples{{{0.01, 0.04, 0.03}, {0.03, 0.06, 0.06}},
                                    {{0.01, 0.02, 0.03}, {0.03, 0.04, 0.04}},
                                    {{0.5, 0.25, 0.875}, {1.0, 0.75, 1.0}},
                                    {{0.02, 0.02, 0.5}, {0.06, 0.06, 0.5}}};
  int holm_ok = 0;
  for (const auto& t : triples) holm_ok += holm_bonferroni(t.raw) == t.adjusted;

  std::vector<double> curve, values;
  for (int r = 0; r < 6; ++r) {
    for (int e = 0; e < 20; ++e) values.push_back(0.5 + 0.4 * (1 - std::exp(-e / 5.0)) + 0.01 * rng.normal());
  }
  const RunMatrix m("x", 6, 20, values);
  std::vector<double> affine(values);
  for (auto& v : affine) v = 2.5 * v + 0.3;
  const RunMatrix ma("y", 6, 20, affine);
  const double rho_self = pearson_epoch_correlation(m, m);
  const double rho_affine = pearson_epoch_correlation(m, ma);
  const double rho_err = std::max(std::fabs(rho_self - 1), std::fabs(rho_affine - 1));

  return {worst_p <= 1e-6 && holm_ok == static_cast<int>(triples.size()) && rho_err <= 1e-12,
          fmt("Welch max |p - reference| = %.3g over 20 pairs (<= 1e-6); Holm triples exact %d/%zu; "
              "Pearson self/affine max deviation %.3g (<= 1e-12)",
              worst_p, holm_ok, triples.size(), rho_err)};
}

// ---------------------------------------------------------------------------
// 7. end-to-end experiment

std::vector<RngSource> table_sources(const fs::path& qrng, const fs::path& bqrng) {
  std::vector<RngSource> s;
  s.push_back(RngSource::prng_unbiased("prng", 1));
  s.push_back(RngSource::prng_biased("b-prng", kBiasOneProb, 2));
  s.push_back(RngSource::file_sequence("qrng", qrng));
  s.push_back(RngSource::file_sequence("b-qrng", bqrng));
  return s;
}

Outcome criterion_7() {
  ScratchDir dir;
  // both file sources unbiased, long enough for 31 runs x 82 parameters
  const StreamLayout file_layout{65, 8192, 1};
  write_bitfile(generate_bits(QubitBiasProfile::scalar(0.5), file_layout, 71), dir.path() / "qrng.bin",
                BitFormat::Packed, "bernoulli:p0=0.5", 71);
  write_bitfile(generate_bits(QubitBiasProfile::scalar(0.5), file_layout, 72), dir.path() / "b-qrng.bin",
                BitFormat::Packed, "bernoulli:p0=0.5", 72);

  const ExperimentConfig config;
  Stopwatch clock;
  auto sources = table_sources(dir.path() / "qrng.bin", dir.path() / "b-qrng.bin");
  const auto outcome = run_experiment_to_dir(config, sources, dir.path() / "out");
  const double secs = clock.seconds();

  double min_rho = 1.0;
  for (const auto& p : outcome.summary.pairs) min_rho = std::min(min_rho, p.pearson_rho);
  const bool main_ok = secs < 300.0 && outcome.summary.pairs.size() == 6 &&
                       outcome.summary.no_significant_difference && min_rho > 0.95;

  double grad = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) grad = std::max(grad, gradient_check(config.hidden, 25, seed));

  auto again = table_sources(dir.path() / "qrng.bin", dir.path() / "b-qrng.bin");
  const bool deterministic = run_experiment(config, again) == outcome.matrices;

  int stable = 0;
  for (std::uint64_t aux = 1; aux <= 5; ++aux) {
    ExperimentConfig c = config;
    c.base_seed = aux;
    auto s = table_sources(dir.path() / "qrng.bin", dir.path() / "b-qrng.bin");
    stable += compare_all(run_experiment(c, s), c.alpha).no_significant_difference;
  }

  const bool pass = main_ok && grad < 1e-5 && deterministic && stable >= 4;
  return {pass, fmt("%.1f s (< 300 s), %zu pairwise rows, verdict %s, min adjusted p %.3f, min rho %.4f (> 0.95); "
                    "gradient check %.2g (< 1e-5); rerun identical: %s; verdict true for %d/5 auxiliary seeds (>= 4)",
                    secs, outcome.summary.pairs.size(), outcome.summary.no_significant_difference ? "true" : "false",
                    outcome.summary.min_adjusted_p, min_rho, grad, deterministic ? "yes" : "no", stable)};
}

// ---------------------------------------------------------------------------
// 8. generator determinism and throughput

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome criterion_8() {
  ScratchDir dir;
  const auto profile = QubitBiasProfile::scalar(kBiasZeroProb);
  Stopwatch clock;
  const auto s = generate_bits(profile, kDeskLayout, 808);
  write_bitfile(s, dir.path() / "a.bin", BitFormat::Packed, "bernoulli", 808);
  const double secs = clock.seconds();
  write_bitfile(generate_bits(profile, kDeskLayout, 808), dir.path() / "b.bin", BitFormat::Packed, "bernoulli", 808);
  const bool identical = slurp(dir.path() / "a.bin") == slurp(dir.path() / "b.bin") &&
                         slurp(dir.path() / "a.bin.meta") == slurp(dir.path() / "b.bin.meta");
  const double rate = static_cast<double>(s.size()) / secs;
  return {identical && rate >= 1e7, fmt("identical seeds give byte-identical files: %s; generation + packing "
                                        "%.3g bits/s over %llu bits (>= 1e7)",
                                        identical ? "yes" : "no", rate, static_cast<unsigned long long>(s.size()))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"exhaustive-oracle equivalence", criterion_1}},
      {2, {"bias reproduction", criterion_2}},
      {3, {"integer-distribution distance", criterion_3}},
      {4, {"unbiased control", criterion_4}},
      {5, {"test-battery calibration", criterion_5}},
      {6, {"comparison machinery oracles", criterion_6}},
      {7, {"end-to-end experiment", criterion_7}},
      {8, {"generator determinism and throughput", criterion_8}},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long n = std::strtol(argv[i], &end, 10);
    if (*end != '\0' || !criteria.count(static_cast<int>(n))) {
      std::fprintf(stderr, "usage: %s [criterion 1-8 ...]\n", argv[0]);
      return 2;
    }
    selected.push_back(static_cast<int>(n));
  }
  if (selected.empty()) {
    for (const auto& [n, c] : criteria) selected.push_back(n);
  }

  int failures = 0;
  for (int n : selected) {
    const auto& [name, fn] = criteria.at(n);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d [%s] %s: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
