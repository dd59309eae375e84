// qbias command-line front end. Talks to the library only through qbias.h.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qbias/qbias.h"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kDegenerate = 4 };

int verbosity() {
  const char* env = std::getenv("QBIAS_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

template <class... Args>
void log_info(const char* fmt, Args... args) {
  if (verbosity() >= 1) {
    std::fprintf(stderr, "qbias: ");
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

template <class... Args>
void log_debug(const char* fmt, Args... args) {
  if (verbosity() >= 2) {
    std::fprintf(stderr, "qbias[debug]: ");
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

int exit_code_for(qbias_status s) {
  switch (s) {
    case QBIAS_OK: return kOk;
    case QBIAS_E_USAGE:
    case QBIAS_E_LAYOUT:
    case QBIAS_E_DOMAIN:
    case QBIAS_E_INDEX:
    case QBIAS_E_SHAPE:
    case QBIAS_E_NULL_ARGUMENT: return kUsage;
    case QBIAS_E_DEGENERATE:
    case QBIAS_E_DIVERGED: return kDegenerate;
    default: return kData;
  }
}

struct Failure {
  int code;
};

void check(qbias_status s) {
  if (s == QBIAS_OK) return;
  std::fprintf(stderr, "qbias: error (%s): %s\n", qbias_status_name(s), qbias_last_error());
  throw Failure{exit_code_for(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
  std::fprintf(stderr, "qbias: error (usage): %s\n", message.c_str());
  throw Failure{kUsage};
}

struct CString {
  char* p = nullptr;
  ~CString() { qbias_string_free(p); }
};

void write_text(const std::string& path, const char* text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f || !(f << text)) {
    std::fprintf(stderr, "qbias: error (io): cannot write %s\n", path.c_str());
    throw Failure{kData};
  }
}

qbias_format format_code(const std::string& name) {
  if (name.empty() || name == "auto") return QBIAS_FORMAT_AUTO;
  if (name == "packed") return QBIAS_FORMAT_PACKED;
  if (name == "ascii") return QBIAS_FORMAT_ASCII;
  usage_error("unknown format '" + name + "' (expected packed, ascii or auto)");
}

// A bias argument is either a probability p(0) or a CSV profile path.
std::vector<double> parse_bias(const std::string& bias) {
  char* end = nullptr;
  const double v = std::strtod(bias.c_str(), &end);
  if (!bias.empty() && end == bias.c_str() + bias.size()) return {v};
  size_t count = 0;
  const auto first = qbias_bias_profile_read(bias.c_str(), nullptr, 0, &count);
  if (first != QBIAS_E_BUFFER_TOO_SMALL) check(first);
  std::vector<double> probs(count);
  check(qbias_bias_profile_read(bias.c_str(), probs.data(), probs.size(), &count));
  return probs;
}

struct LayoutArgs {
  std::optional<uint64_t> qubits, shots, experiments;

  void add(CLI::App* app) {
    app->add_option("--qubits", qubits, "qubits N per shot");
    app->add_option("--shots", shots, "shots S per experiment");
    app->add_option("--experiments", experiments, "experiments R");
  }

  std::optional<qbias_layout> get() const {
    if (!qubits && !shots && !experiments) return std::nullopt;
    if (!(qubits && shots && experiments)) usage_error("--qubits, --shots and --experiments must be given together");
    return qbias_layout{*qubits, *shots, *experiments};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biased random bit streams: generation, analysis, theory and training experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qbias_version()));

  // generate
  auto* gen = app.add_subcommand("generate", "write a Bernoulli bit stream with per-qubit bias");
  qbias_layout gen_layout{65, 8192, 564};
  std::string gen_bias = "0.5";
  uint64_t gen_seed = 1;
  std::string gen_out;
  std::string gen_format = "packed";
  gen->add_option("--qubits", gen_layout.num_qubits, "qubits N per shot")->capture_default_str();
  gen->add_option("--shots", gen_layout.shots_per_experiment, "shots S per experiment")->capture_default_str();
  gen->add_option("--experiments", gen_layout.num_experiments, "experiments R")->capture_default_str();
  gen->add_option("--bias", gen_bias, "p(0) for every qubit, or a CSV profile of per-qubit p(0)")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output bit file")->required();
  gen->add_option("--format", gen_format, "packed or ascii")->capture_default_str();

  // analyze-bits
  auto* ab = app.add_subcommand("analyze-bits", "per-qubit probabilities, chi-squared, runs and Hellinger summary");
  std::string ab_in, ab_format, ab_csv, ab_json;
  double ab_alpha = 0.05;
  LayoutArgs ab_layout;
  ab->add_option("--in", ab_in, "input bit file")->required();
  ab->add_option("--format", ab_format, "packed, ascii or auto");
  ab_layout.add(ab);
  ab->add_option("--alpha", ab_alpha, "significance level")->capture_default_str();
  ab->add_option("--csv", ab_csv, "write the per-qubit table here");
  ab->add_option("--json", ab_json, "write the JSON report here instead of stdout");

  // analyze-ints
  auto* ai = app.add_subcommand("analyze-ints", "histogram of C-bit integers in K bins");
  std::string ai_in, ai_format, ai_out, ai_json;
  unsigned ai_bits = 32;
  uint32_t ai_bins = 250;
  std::optional<double> ai_theory;
  ai->add_option("--in", ai_in, "input bit file")->required();
  ai->add_option("--format", ai_format, "packed, ascii or auto");
  ai->add_option("--word-bits", ai_bits, "bits per integer C")->capture_default_str();
  ai->add_option("--bins", ai_bins, "number of bins K")->capture_default_str();
  ai->add_option("--theory", ai_theory, "overlay the closed-form histogram for bit probability p(1)");
  ai->add_option("--out", ai_out, "write the histogram CSV here");
  ai->add_option("--json", ai_json, "write the JSON summary here instead of stdout");

  // theory
  auto* th = app.add_subcommand("theory", "closed-form bin populations for i.i.d. bits with p(1) = p");
  double th_p = 0.5;
  unsigned th_bits = 32;
  uint32_t th_bins = 250;
  uint64_t th_total = 300318720ULL / 32;
  std::string th_out, th_json;
  th->add_option("--p", th_p, "single-bit probability p(1)")->capture_default_str();
  th->add_option("--word-bits", th_bits, "bits per integer C")->capture_default_str();
  th->add_option("--bins", th_bins, "number of bins K")->capture_default_str();
  th->add_option("--total", th_total, "number of integers L")->capture_default_str();
  th->add_option("--out", th_out, "write the histogram CSV here");
  th->add_option("--json", th_json, "write the JSON summary here instead of stdout");

  // experiment
  auto* ex = app.add_subcommand("experiment", "train the toy network per RNG source and compare learning curves");
  std::string ex_config, ex_sources = "prng=prng,b-prng=biased", ex_out;
  ex->add_option("--config", ex_config, "key=value configuration file");
  ex->add_option("--sources", ex_sources, "comma-separated label=kind[:key=value...] specs")->capture_default_str();
  ex->add_option("--out", ex_out, "output directory")->required();

  // convert
  auto* cv = app.add_subcommand("convert", "rewrite a bit file in another format");
  std::string cv_in, cv_out, cv_from, cv_to = "ascii";
  LayoutArgs cv_layout;
  cv->add_option("--in", cv_in, "input bit file")->required();
  cv->add_option("--out", cv_out, "output bit file")->required();
  cv->add_option("--from", cv_from, "input format (packed, ascii or auto)");
  cv->add_option("--to", cv_to, "output format")->capture_default_str();
  cv_layout.add(cv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      const auto probs = parse_bias(gen_bias);
      const auto fmt = format_code(gen_format);
      if (fmt == QBIAS_FORMAT_AUTO) usage_error("--format must be packed or ascii");
      log_info("generating %llu x %llu x %llu bits", (unsigned long long)gen_layout.num_qubits,
               (unsigned long long)gen_layout.shots_per_experiment, (unsigned long long)gen_layout.num_experiments);
      qbias_stream* raw = nullptr;
      check(qbias_stream_generate(&gen_layout, probs.data(), probs.size(), gen_seed, &raw));
      std::unique_ptr<qbias_stream, decltype(&qbias_stream_free)> stream(raw, qbias_stream_free);
      const std::string generator = probs.size() == 1 ? "bernoulli:p0=" + gen_bias : "bernoulli:profile=" + gen_bias;
      check(qbias_stream_write(stream.get(), gen_out.c_str(), fmt, generator.c_str(), 1, gen_seed));
      std::printf("%llu\n", (unsigned long long)qbias_stream_size(stream.get()));
    } else if (ab->parsed()) {
      const auto layout = ab_layout.get();
      CString json, csv;
      check(qbias_analyze_bits_file(ab_in.c_str(), format_code(ab_format), layout ? &*layout : nullptr, ab_alpha,
                                    &json.p, ab_csv.empty() ? nullptr : &csv.p));
      if (!ab_csv.empty()) write_text(ab_csv, csv.p);
      if (ab_json.empty()) std::printf("%s\n", json.p);
      else write_text(ab_json, json.p);
    } else if (ai->parsed()) {
      if (ai_theory && *ai_theory < 0.0) usage_error("--theory must lie in [0, 1]");
      CString json, csv;
      log_debug("binning %u-bit integers into %u bins", ai_bits, ai_bins);
      check(qbias_analyze_ints_file(ai_in.c_str(), format_code(ai_format), ai_bits, ai_bins,
                                    ai_theory ? *ai_theory : -1.0, &json.p, ai_out.empty() ? nullptr : &csv.p));
      if (!ai_out.empty()) write_text(ai_out, csv.p);
      if (ai_json.empty()) std::printf("%s\n", json.p);
      else write_text(ai_json, json.p);
    } else if (th->parsed()) {
      CString json, csv;
      check(qbias_theory_report(th_p, th_bits, th_bins, th_total, &json.p, th_out.empty() ? nullptr : &csv.p));
      if (!th_out.empty()) write_text(th_out, csv.p);
      if (th_json.empty()) std::printf("%s\n", json.p);
      else write_text(th_json, json.p);
    } else if (ex->parsed()) {
      CString json;
      log_info("running experiment into %s", ex_out.c_str());
      check(qbias_experiment_run(ex_config.empty() ? nullptr : ex_config.c_str(), ex_sources.c_str(), ex_out.c_str(),
                                 &json.p));
      std::printf("%s\n", json.p);
    } else if (cv->parsed()) {
      const auto layout = cv_layout.get();
      const auto to = format_code(cv_to);
      if (to == QBIAS_FORMAT_AUTO) usage_error("--to must be packed or ascii");
      qbias_stream* raw = nullptr;
      check(qbias_stream_read(cv_in.c_str(), format_code(cv_from), layout ? &*layout : nullptr, &raw));
      std::unique_ptr<qbias_stream, decltype(&qbias_stream_free)> stream(raw, qbias_stream_free);
      check(qbias_stream_write(stream.get(), cv_out.c_str(), to, "convert", 0, 0));
      std::printf("%llu\n", (unsigned long long)qbias_stream_size(stream.get()));
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return kOk;
}
