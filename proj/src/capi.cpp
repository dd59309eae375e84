#include "qbias/qbias.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qbias/analysis.hpp"
#include "qbias/bitstream.hpp"
#include "qbias/compare.hpp"
#include "qbias/error.hpp"
#include "qbias/integers.hpp"
#include "qbias/stats.hpp"
#include "qbias/toytrain.hpp"

struct qbias_stream {
  qbias::BitStream stream;
};

struct qbias_source {
  qbias::RngSource source;
};

namespace {

thread_local std::string g_last_error;

qbias_status status_for(qbias::ErrorKind kind) {
  using qbias::ErrorKind;
  switch (kind) {
    case ErrorKind::Usage: return QBIAS_E_USAGE;
    case ErrorKind::Layout: return QBIAS_E_LAYOUT;
    case ErrorKind::Domain: return QBIAS_E_DOMAIN;
    case ErrorKind::Index: return QBIAS_E_INDEX;
    case ErrorKind::Parse: return QBIAS_E_PARSE;
    case ErrorKind::Length: return QBIAS_E_LENGTH;
    case ErrorKind::Io: return QBIAS_E_IO;
    case ErrorKind::Degenerate: return QBIAS_E_DEGENERATE;
    case ErrorKind::Shape: return QBIAS_E_SHAPE;
    case ErrorKind::Exhausted: return QBIAS_E_EXHAUSTED;
    case ErrorKind::Diverged: return QBIAS_E_DIVERGED;
  }
  return QBIAS_E_INTERNAL;
}

qbias_status set_error(qbias_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class F>
qbias_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const qbias::Error& e) {
    return set_error(status_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(QBIAS_E_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(QBIAS_E_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(QBIAS_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(QBIAS_E_INTERNAL, "unknown exception");
  }
}

#define QBIAS_REQUIRE(ptr)                                                    \
  do {                                                                        \
    if ((ptr) == nullptr) return set_error(QBIAS_E_NULL_ARGUMENT, #ptr " is NULL"); \
  } while (0)

std::optional<qbias::StreamLayout> to_layout(const qbias_layout* layout) {
  if (!layout) return std::nullopt;
  qbias::StreamLayout l{layout->num_qubits, layout->shots_per_experiment, layout->num_experiments};
  l.validate();
  return l;
}

std::optional<qbias::BitFormat> to_format(qbias_format format) {
  switch (format) {
    case QBIAS_FORMAT_AUTO: return std::nullopt;
    case QBIAS_FORMAT_PACKED: return qbias::BitFormat::Packed;
    case QBIAS_FORMAT_ASCII: return qbias::BitFormat::Ascii;
  }
  qbias::fail(qbias::ErrorKind::Usage, "unknown format code");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill(const qbias::TestResult& r, qbias_test_result* out) {
  out->statistic = r.statistic;
  out->p_value = r.p_value;
  out->alpha = r.alpha;
  out->passed = r.passed ? 1 : 0;
  out->flags = r.flags;
}

}  // namespace

extern "C" {

const char* qbias_version(void) { return "1.0.0"; }

const char* qbias_last_error(void) { return g_last_error.c_str(); }

const char* qbias_status_name(qbias_status status) {
  switch (status) {
    case QBIAS_OK: return "ok";
    case QBIAS_E_USAGE: return "usage";
    case QBIAS_E_LAYOUT: return "layout";
    case QBIAS_E_DOMAIN: return "domain";
    case QBIAS_E_INDEX: return "index";
    case QBIAS_E_PARSE: return "parse";
    case QBIAS_E_LENGTH: return "length";
    case QBIAS_E_IO: return "io";
    case QBIAS_E_DEGENERATE: return "degenerate";
    case QBIAS_E_SHAPE: return "shape";
    case QBIAS_E_EXHAUSTED: return "exhausted";
    case QBIAS_E_DIVERGED: return "diverged";
    case QBIAS_E_NULL_ARGUMENT: return "null-argument";
    case QBIAS_E_BUFFER_TOO_SMALL: return "buffer-too-small";
    case QBIAS_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void qbias_string_free(char* str) { std::free(str); }

// ---- streams ---------------------------------------------------------------

qbias_status qbias_stream_generate(const qbias_layout* layout, const double* zero_probs, size_t count, uint64_t seed,
                                   qbias_stream** out) {
  QBIAS_REQUIRE(layout);
  QBIAS_REQUIRE(zero_probs);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    qbias::QubitBiasProfile profile(std::vector<double>(zero_probs, zero_probs + count));
    auto stream = qbias::generate_bits(profile, *to_layout(layout), seed);
    *out = new qbias_stream{std::move(stream)};
    return QBIAS_OK;
  });
}

qbias_status qbias_stream_from_bits(const uint8_t* bits, uint64_t count, const qbias_layout* layout,
                                    qbias_stream** out) {
  if (count > 0) QBIAS_REQUIRE(bits);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    auto stream = qbias::BitStream::from_bits(std::span(bits, count), to_layout(layout));
    *out = new qbias_stream{std::move(stream)};
    return QBIAS_OK;
  });
}

qbias_status qbias_stream_read(const char* path, qbias_format format, const qbias_layout* layout,
                               qbias_stream** out) {
  QBIAS_REQUIRE(path);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    auto stream = qbias::parse_bitfile(path, to_format(format), to_layout(layout));
    *out = new qbias_stream{std::move(stream)};
    return QBIAS_OK;
  });
}

qbias_status qbias_stream_write(const qbias_stream* stream, const char* path, qbias_format format,
                                const char* generator, int has_seed, uint64_t seed) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(path);
  return guarded([&] {
    const auto fmt = to_format(format).value_or(qbias::BitFormat::Packed);
    qbias::write_bitfile(stream->stream, path, fmt, generator ? generator : "",
                         has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
    return QBIAS_OK;
  });
}

void qbias_stream_free(qbias_stream* stream) { delete stream; }

uint64_t qbias_stream_size(const qbias_stream* stream) { return stream ? stream->stream.size() : 0; }

qbias_status qbias_stream_layout(const qbias_stream* stream, qbias_layout* out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    const auto& l = stream->stream.require_layout();
    *out = qbias_layout{l.num_qubits, l.shots_per_experiment, l.num_experiments};
    return QBIAS_OK;
  });
}

qbias_status qbias_stream_bit(const qbias_stream* stream, uint64_t index, int* out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = stream->stream.at(index) ? 1 : 0;
    return QBIAS_OK;
  });
}

qbias_status qbias_stream_count_ones(const qbias_stream* stream, uint64_t* out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  *out = stream->stream.count_ones();
  return QBIAS_OK;
}

qbias_status qbias_stream_qubit(const qbias_stream* stream, uint64_t qubit, qbias_stream** out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = new qbias_stream{qbias::qubit_stream(stream->stream, qubit)};
    return QBIAS_OK;
  });
}

qbias_status qbias_bit_probabilities(const qbias_stream* stream, double* per_qubit, size_t capacity, double* mean,
                                     double* std_dev) {
  QBIAS_REQUIRE(stream);
  return guarded([&] {
    const auto report = qbias::estimate_bit_probabilities(stream->stream);
    if (mean) *mean = report.aggregate_mean;
    if (std_dev) *std_dev = report.aggregate_std;
    if (per_qubit) {
      if (capacity < report.per_qubit.size()) {
        return set_error(QBIAS_E_BUFFER_TOO_SMALL, "need room for " + std::to_string(report.per_qubit.size()) +
                                                       " probabilities");
      }
      std::copy(report.per_qubit.begin(), report.per_qubit.end(), per_qubit);
    }
    return QBIAS_OK;
  });
}

// ---- integers --------------------------------------------------------------

qbias_status qbias_bits_to_integers(const qbias_stream* stream, unsigned word_bits, uint64_t* values, size_t capacity,
                                    size_t* count) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(count);
  return guarded([&] {
    const auto seq = qbias::bits_to_integers(stream->stream, word_bits);
    *count = seq.values.size();
    if (capacity < seq.values.size()) return set_error(QBIAS_E_BUFFER_TOO_SMALL, "integer buffer too small");
    if (!seq.values.empty()) {
      QBIAS_REQUIRE(values);
      std::copy(seq.values.begin(), seq.values.end(), values);
    }
    return QBIAS_OK;
  });
}

qbias_status qbias_bin_assign(uint64_t value, uint32_t num_bins, unsigned word_bits, uint32_t* bin) {
  QBIAS_REQUIRE(bin);
  return guarded([&] {
    *bin = qbias::bin_assign(value, num_bins, word_bits);
    return QBIAS_OK;
  });
}

qbias_status qbias_histogram(const qbias_stream* stream, unsigned word_bits, uint32_t num_bins, double* counts,
                             uint64_t* total) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(counts);
  return guarded([&] {
    qbias::IntegerBinner binner(word_bits, num_bins);
    binner.feed(stream->stream);
    const auto h = binner.result();
    std::copy(h.bin_counts.begin(), h.bin_counts.end(), counts);
    if (total) *total = h.total;
    return QBIAS_OK;
  });
}

qbias_status qbias_popcount_count_below(uint64_t x_low, uint64_t x_high, unsigned weight, unsigned word_bits,
                                        uint64_t* out) {
  QBIAS_REQUIRE(out);
  return guarded([&] {
    const unsigned __int128 x = (static_cast<unsigned __int128>(x_high) << 64) | x_low;
    *out = qbias::popcount_count_below(x, weight, word_bits);
    return QBIAS_OK;
  });
}

qbias_status qbias_theoretical_histogram(double p, unsigned word_bits, uint32_t num_bins, uint64_t total,
                                         double* counts) {
  QBIAS_REQUIRE(counts);
  return guarded([&] {
    const auto h = qbias::theoretical_histogram(p, word_bits, num_bins, total);
    std::copy(h.bin_counts.begin(), h.bin_counts.end(), counts);
    return QBIAS_OK;
  });
}

// ---- statistics --------------------------------------------------------------

qbias_status qbias_hellinger(const double* q1, const double* q2, size_t count, double* out) {
  QBIAS_REQUIRE(q1);
  QBIAS_REQUIRE(q2);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = qbias::hellinger(qbias::DiscreteDistribution({q1, q1 + count}),
                            qbias::DiscreteDistribution({q2, q2 + count}));
    return QBIAS_OK;
  });
}

qbias_status qbias_chi_squared_bits(uint64_t zeros, uint64_t ones, double alpha, qbias_test_result* out) {
  QBIAS_REQUIRE(out);
  return guarded([&] {
    fill(qbias::chi_squared_uniform_bits(zeros, ones, alpha), out);
    return QBIAS_OK;
  });
}

qbias_status qbias_runs_test(const qbias_stream* stream, double alpha, qbias_test_result* out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    fill(qbias::runs_test(stream->stream, alpha), out);
    return QBIAS_OK;
  });
}

qbias_status qbias_per_qubit_runs(const qbias_stream* stream, double alpha, qbias_test_result* per_qubit,
                                  size_t capacity, qbias_test_result* whole) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(per_qubit);
  return guarded([&] {
    const auto runs = qbias::per_qubit_runs(stream->stream, alpha);
    if (capacity < runs.per_qubit.size()) return set_error(QBIAS_E_BUFFER_TOO_SMALL, "result buffer too small");
    for (std::size_t n = 0; n < runs.per_qubit.size(); ++n) fill(runs.per_qubit[n], per_qubit + n);
    if (whole) fill(runs.whole, whole);
    return QBIAS_OK;
  });
}

qbias_status qbias_monobit_test(const qbias_stream* stream, double alpha, qbias_test_result* out) {
  QBIAS_REQUIRE(stream);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    fill(qbias::monobit_frequency_test(stream->stream, alpha), out);
    return QBIAS_OK;
  });
}

// ---- comparison --------------------------------------------------------------

qbias_status qbias_welch_t_test(const double* x, size_t nx, const double* y, size_t ny, double* t, double* dof,
                                double* p_value) {
  QBIAS_REQUIRE(x);
  QBIAS_REQUIRE(y);
  QBIAS_REQUIRE(p_value);
  return guarded([&] {
    const auto r = qbias::welch_t_test(std::span(x, nx), std::span(y, ny));
    if (t) *t = r.t;
    if (dof) *dof = r.dof;
    *p_value = r.p_value;
    return QBIAS_OK;
  });
}

qbias_status qbias_holm_bonferroni(const double* p_values, size_t count, double* adjusted) {
  if (count > 0) {
    QBIAS_REQUIRE(p_values);
    QBIAS_REQUIRE(adjusted);
  }
  return guarded([&] {
    const auto adj = qbias::holm_bonferroni(std::span(p_values, count));
    std::copy(adj.begin(), adj.end(), adjusted);
    return QBIAS_OK;
  });
}

qbias_status qbias_compare_matrices(const double* x, const double* y, size_t runs_x, size_t runs_y, size_t epochs,
                                    double alpha, double* raw_p, double* adjusted_p, double* min_adjusted_p,
                                    double* rho, int* no_significant_difference) {
  QBIAS_REQUIRE(x);
  QBIAS_REQUIRE(y);
  return guarded([&] {
    qbias::RunMatrix mx("x", runs_x, epochs, std::vector<double>(x, x + runs_x * epochs));
    qbias::RunMatrix my("y", runs_y, epochs, std::vector<double>(y, y + runs_y * epochs));
    const auto report = qbias::pairwise_epoch_comparison(mx, my, alpha);
    if (raw_p) std::copy(report.raw_p.begin(), report.raw_p.end(), raw_p);
    if (adjusted_p) std::copy(report.adjusted_p.begin(), report.adjusted_p.end(), adjusted_p);
    if (min_adjusted_p) *min_adjusted_p = report.min_adjusted_p;
    if (rho) *rho = report.pearson_rho;
    if (no_significant_difference) *no_significant_difference = report.no_significant_difference ? 1 : 0;
    return QBIAS_OK;
  });
}

// ---- sources -----------------------------------------------------------------

qbias_status qbias_source_create(const char* spec, unsigned word_bits, qbias_source** out) {
  QBIAS_REQUIRE(spec);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = new qbias_source{qbias::parse_source_spec(spec, 0, word_bits)};
    return QBIAS_OK;
  });
}

void qbias_source_free(qbias_source* source) { delete source; }

qbias_status qbias_source_next_integer(qbias_source* source, uint64_t* out) {
  QBIAS_REQUIRE(source);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = source->source.next_integer();
    return QBIAS_OK;
  });
}

qbias_status qbias_source_next_uniform(qbias_source* source, double* out) {
  QBIAS_REQUIRE(source);
  QBIAS_REQUIRE(out);
  return guarded([&] {
    *out = source->source.next_uniform();
    return QBIAS_OK;
  });
}

qbias_status qbias_source_consumed(const qbias_source* source, uint64_t* out) {
  QBIAS_REQUIRE(source);
  QBIAS_REQUIRE(out);
  *out = source->source.consumed();
  return QBIAS_OK;
}

qbias_status qbias_he_uniform_init(size_t fan_in, size_t fan_out, qbias_source* source, double* weights) {
  QBIAS_REQUIRE(source);
  QBIAS_REQUIRE(weights);
  return guarded([&] {
    const auto m = qbias::he_uniform_init(fan_in, fan_out, source->source);
    std::copy(m.data.begin(), m.data.end(), weights);
    return QBIAS_OK;
  });
}

qbias_status qbias_gradient_check(size_t hidden, size_t batch, uint64_t seed, double* max_rel_error) {
  QBIAS_REQUIRE(max_rel_error);
  return guarded([&] {
    *max_rel_error = qbias::gradient_check(hidden, batch, seed);
    return QBIAS_OK;
  });
}

// ---- reports -----------------------------------------------------------------

qbias_status qbias_analyze_bits_file(const char* path, qbias_format format, const qbias_layout* layout, double alpha,
                                     char** json, char** csv) {
  QBIAS_REQUIRE(path);
  QBIAS_REQUIRE(json);
  return guarded([&] {
    const auto analysis = qbias::analyze_bit_file(path, to_format(format), to_layout(layout), alpha);
    std::string csv_text;
    if (csv) {
      std::ostringstream os;
      qbias::write_per_qubit_csv(os, analysis);
      csv_text = os.str();
    }
    *json = dup_string(qbias::to_json(analysis).dump(2));
    if (csv) *csv = dup_string(csv_text);
    return QBIAS_OK;
  });
}

qbias_status qbias_analyze_ints_file(const char* path, qbias_format format, unsigned word_bits, uint32_t num_bins,
                                     double theory_p, char** json, char** csv) {
  QBIAS_REQUIRE(path);
  QBIAS_REQUIRE(json);
  return guarded([&] {
    const std::optional<double> theory = theory_p < 0.0 ? std::nullopt : std::optional<double>(theory_p);
    const auto analysis = qbias::analyze_int_file(path, word_bits, num_bins, theory, to_format(format));
    std::string csv_text;
    if (csv) {
      std::ostringstream os;
      qbias::write_csv(os, analysis);
      csv_text = os.str();
    }
    *json = dup_string(qbias::to_json(analysis).dump(2));
    if (csv) *csv = dup_string(csv_text);
    return QBIAS_OK;
  });
}

qbias_status qbias_theory_report(double p, unsigned word_bits, uint32_t num_bins, uint64_t total, char** json,
                                 char** csv) {
  QBIAS_REQUIRE(json);
  return guarded([&] {
    const auto report = qbias::theory_report(p, word_bits, num_bins, total);
    std::string csv_text;
    if (csv) {
      std::ostringstream os;
      qbias::write_histogram_csv(os, report.histogram);
      csv_text = os.str();
    }
    *json = dup_string(qbias::to_json(report).dump(2));
    if (csv) *csv = dup_string(csv_text);
    return QBIAS_OK;
  });
}

qbias_status qbias_experiment_run(const char* config_path, const char* sources, const char* out_dir, char** json) {
  QBIAS_REQUIRE(sources);
  QBIAS_REQUIRE(out_dir);
  return guarded([&] {
    const auto config = config_path ? qbias::ExperimentConfig::read(config_path) : qbias::ExperimentConfig{};
    auto list = qbias::parse_source_list(sources, config.word_bits);
    const auto outcome = qbias::run_experiment_to_dir(config, list, out_dir);
    if (json) *json = dup_string(qbias::to_json(outcome, config).dump(2));
    return QBIAS_OK;
  });
}

qbias_status qbias_bias_profile_read(const char* path, double* zero_probs, size_t capacity, size_t* count) {
  QBIAS_REQUIRE(path);
  QBIAS_REQUIRE(count);
  return guarded([&] {
    const auto profile = qbias::QubitBiasProfile::read_csv(path);
    *count = profile.size();
    if (capacity < profile.size()) return set_error(QBIAS_E_BUFFER_TOO_SMALL, "profile buffer too small");
    QBIAS_REQUIRE(zero_probs);
    std::copy(profile.zero_probs().begin(), profile.zero_probs().end(), zero_probs);
    return QBIAS_OK;
  });
}

}  // extern "C"
