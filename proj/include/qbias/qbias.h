/*
 * C interface to the qbias library.
 *
 * Every function returns a qbias_status; QBIAS_OK is 0. On failure a
 * description is available from qbias_last_error() on the calling thread
 * until the next call into the library. Handles are opaque and owned by the
 * caller; release them with the matching *_free function. Strings returned
 * through char** out-parameters are heap allocated and released with
 * qbias_string_free.
 */
#ifndef QBIAS_H
#define QBIAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(QBIAS_BUILDING_LIBRARY)
#    define QBIAS_API __declspec(dllexport)
#  else
#    define QBIAS_API __declspec(dllimport)
#  endif
#else
#  define QBIAS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qbias_status {
  QBIAS_OK = 0,
  QBIAS_E_USAGE = 1,
  QBIAS_E_LAYOUT = 2,
  QBIAS_E_DOMAIN = 3,
  QBIAS_E_INDEX = 4,
  QBIAS_E_PARSE = 5,
  QBIAS_E_LENGTH = 6,
  QBIAS_E_IO = 7,
  QBIAS_E_DEGENERATE = 8,
  QBIAS_E_SHAPE = 9,
  QBIAS_E_EXHAUSTED = 10,
  QBIAS_E_DIVERGED = 11,
  QBIAS_E_NULL_ARGUMENT = 12,
  QBIAS_E_BUFFER_TOO_SMALL = 13,
  QBIAS_E_INTERNAL = 14
} qbias_status;

typedef enum qbias_format {
  QBIAS_FORMAT_AUTO = 0, /* sidecar format, else ascii */
  QBIAS_FORMAT_PACKED = 1,
  QBIAS_FORMAT_ASCII = 2
} qbias_format;

typedef struct qbias_layout {
  uint64_t num_qubits;
  uint64_t shots_per_experiment;
  uint64_t num_experiments;
} qbias_layout;

typedef struct qbias_test_result {
  double statistic; /* NaN when degenerate */
  double p_value;
  double alpha;
  int passed;
  unsigned flags; /* bit 0: small sample, bit 1: degenerate */
} qbias_test_result;

typedef struct qbias_stream qbias_stream;
typedef struct qbias_source qbias_source;

QBIAS_API const char* qbias_version(void);
QBIAS_API const char* qbias_last_error(void);
QBIAS_API const char* qbias_status_name(qbias_status status);
QBIAS_API void qbias_string_free(char* str);

/* ---- bit streams ------------------------------------------------------ */

/* zero_probs holds one p_n(0) per qubit, or a single value broadcast to all. */
QBIAS_API qbias_status qbias_stream_generate(const qbias_layout* layout, const double* zero_probs, size_t count,
                                             uint64_t seed, qbias_stream** out);
/* One byte per bit (nonzero = 1). layout may be NULL. */
QBIAS_API qbias_status qbias_stream_from_bits(const uint8_t* bits, uint64_t count, const qbias_layout* layout,
                                              qbias_stream** out);
QBIAS_API qbias_status qbias_stream_read(const char* path, qbias_format format, const qbias_layout* layout,
                                         qbias_stream** out);
/* generator may be NULL; seed is recorded in the sidecar when has_seed != 0. */
QBIAS_API qbias_status qbias_stream_write(const qbias_stream* stream, const char* path, qbias_format format,
                                          const char* generator, int has_seed, uint64_t seed);
QBIAS_API void qbias_stream_free(qbias_stream* stream);

QBIAS_API uint64_t qbias_stream_size(const qbias_stream* stream);
/* Returns QBIAS_E_USAGE when the stream has no layout. */
QBIAS_API qbias_status qbias_stream_layout(const qbias_stream* stream, qbias_layout* out);
QBIAS_API qbias_status qbias_stream_bit(const qbias_stream* stream, uint64_t index, int* out);
QBIAS_API qbias_status qbias_stream_count_ones(const qbias_stream* stream, uint64_t* out);
QBIAS_API qbias_status qbias_stream_qubit(const qbias_stream* stream, uint64_t qubit, qbias_stream** out);

/* per_qubit receives num_qubits values (capacity checked); mean/std may be NULL. */
QBIAS_API qbias_status qbias_bit_probabilities(const qbias_stream* stream, double* per_qubit, size_t capacity,
                                               double* mean, double* std_dev);

/* ---- integers --------------------------------------------------------- */

/* values receives floor(M / C) integers; *count is set to that number even on
   QBIAS_E_BUFFER_TOO_SMALL. */
QBIAS_API qbias_status qbias_bits_to_integers(const qbias_stream* stream, unsigned word_bits, uint64_t* values,
                                              size_t capacity, size_t* count);
QBIAS_API qbias_status qbias_bin_assign(uint64_t value, uint32_t num_bins, unsigned word_bits, uint32_t* bin);
/* Histogram of the stream's C-bit integers into num_bins counts. */
QBIAS_API qbias_status qbias_histogram(const qbias_stream* stream, unsigned word_bits, uint32_t num_bins,
                                       double* counts, uint64_t* total);
/* x is clamped to 2^C; x_high holds bits 64..127 of x (0 or 1 in practice). */
QBIAS_API qbias_status qbias_popcount_count_below(uint64_t x_low, uint64_t x_high, unsigned weight,
                                                  unsigned word_bits, uint64_t* out);
/* p is the single-bit success probability p(1). */
QBIAS_API qbias_status qbias_theoretical_histogram(double p, unsigned word_bits, uint32_t num_bins, uint64_t total,
                                                   double* counts);

/* ---- statistics ------------------------------------------------------- */

QBIAS_API qbias_status qbias_hellinger(const double* q1, const double* q2, size_t count, double* out);
QBIAS_API qbias_status qbias_chi_squared_bits(uint64_t zeros, uint64_t ones, double alpha, qbias_test_result* out);
QBIAS_API qbias_status qbias_runs_test(const qbias_stream* stream, double alpha, qbias_test_result* out);
/* per_qubit receives num_qubits results; whole may be NULL. */
QBIAS_API qbias_status qbias_per_qubit_runs(const qbias_stream* stream, double alpha, qbias_test_result* per_qubit,
                                            size_t capacity, qbias_test_result* whole);
QBIAS_API qbias_status qbias_monobit_test(const qbias_stream* stream, double alpha, qbias_test_result* out);

/* ---- comparison ------------------------------------------------------- */

QBIAS_API qbias_status qbias_welch_t_test(const double* x, size_t nx, const double* y, size_t ny, double* t,
                                          double* dof, double* p_value);
QBIAS_API qbias_status qbias_holm_bonferroni(const double* p_values, size_t count, double* adjusted);
/* x and y are row-major runs x epochs. */
QBIAS_API qbias_status qbias_compare_matrices(const double* x, const double* y, size_t runs_x, size_t runs_y,
                                              size_t epochs, double alpha, double* raw_p, double* adjusted_p,
                                              double* min_adjusted_p, double* rho, int* no_significant_difference);

/* ---- RNG sources and training ---------------------------------------- */

/* spec: label=prng[:seed=k] | label=biased[:p=v][:seed=k] | label=file:path=...[:format=...] */
QBIAS_API qbias_status qbias_source_create(const char* spec, unsigned word_bits, qbias_source** out);
QBIAS_API void qbias_source_free(qbias_source* source);
QBIAS_API qbias_status qbias_source_next_integer(qbias_source* source, uint64_t* out);
QBIAS_API qbias_status qbias_source_next_uniform(qbias_source* source, double* out);
QBIAS_API qbias_status qbias_source_consumed(const qbias_source* source, uint64_t* out);
/* weights receives fan_out * fan_in values, row-major. */
QBIAS_API qbias_status qbias_he_uniform_init(size_t fan_in, size_t fan_out, qbias_source* source, double* weights);
QBIAS_API qbias_status qbias_gradient_check(size_t hidden, size_t batch, uint64_t seed, double* max_rel_error);

/* ---- file-level reports (what the CLI prints) ------------------------ */

/* layout may be NULL (sidecar or single-qubit fallback). csv may be NULL. */
QBIAS_API qbias_status qbias_analyze_bits_file(const char* path, qbias_format format, const qbias_layout* layout,
                                               double alpha, char** json, char** csv);
/* theory_p < 0 disables the theoretical overlay. csv may be NULL. */
QBIAS_API qbias_status qbias_analyze_ints_file(const char* path, qbias_format format, unsigned word_bits,
                                               uint32_t num_bins, double theory_p, char** json, char** csv);
QBIAS_API qbias_status qbias_theory_report(double p, unsigned word_bits, uint32_t num_bins, uint64_t total,
                                           char** json, char** csv);
/* Writes run matrices and comparison reports into out_dir. config_path may be
   NULL for defaults. json receives the summary. */
QBIAS_API qbias_status qbias_experiment_run(const char* config_path, const char* sources, const char* out_dir,
                                            char** json);
QBIAS_API qbias_status qbias_bias_profile_read(const char* path, double* zero_probs, size_t capacity, size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* QBIAS_H */
