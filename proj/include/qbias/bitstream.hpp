#pragma once

// Bit streams organized as shots over N qubits: generation from a per-qubit
// Bernoulli model, per-qubit extraction, probability estimation and file I/O.
//
// Positions are 0-based in storage. Logical bit B_{n+1+s*N} (1-based) of shot s
// and qubit n lives at index n + s*N.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qbias {

/// N qubits x S shots per experiment x R experiments; M = N*S*R bits.
struct StreamLayout {
  std::uint64_t num_qubits = 65;
  std::uint64_t shots_per_experiment = 8192;
  std::uint64_t num_experiments = 564;

  /// Throws Layout if any field is zero or the product overflows.
  void validate() const;
  std::uint64_t total_bits() const;
  /// Bits per qubit, S*R.
  std::uint64_t samples_per_qubit() const { return shots_per_experiment * num_experiments; }

  bool operator==(const StreamLayout&) const = default;
};

/// Immutable packed bit sequence. Word w holds bits [64w, 64w+63], LSB first;
/// bits past size() in the last word are always zero.
class BitStream {
 public:
  BitStream() = default;
  BitStream(std::vector<std::uint64_t> words, std::uint64_t size,
            std::optional<StreamLayout> layout = std::nullopt);

  /// One element per bit, any nonzero value is a 1.
  static BitStream from_bits(std::span<const std::uint8_t> bits,
                             std::optional<StreamLayout> layout = std::nullopt);

  std::uint64_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool operator[](std::uint64_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  /// Bounds-checked access; throws Index.
  bool at(std::uint64_t i) const;

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  const std::optional<StreamLayout>& layout() const noexcept { return layout_; }
  /// Throws Usage when the stream carries no layout.
  const StreamLayout& require_layout() const;

  std::uint64_t count_ones() const noexcept;
  std::uint64_t count_zeros() const noexcept { return size_ - count_ones(); }

  /// Same bits, different layout (validated against size()).
  BitStream with_layout(std::optional<StreamLayout> layout) const;

  std::vector<std::uint8_t> to_bits() const;

  bool operator==(const BitStream&) const = default;

 private:
  std::vector<std::uint64_t> words_;
  std::uint64_t size_ = 0;
  std::optional<StreamLayout> layout_;
};

/// Appends bits one at a time or word-wise; finish() yields the immutable stream.
class BitStreamBuilder {
 public:
  void reserve(std::uint64_t bits) { words_.reserve((bits + 63) / 64); }
  void push_back(bool bit);
  /// Appends the low `nbits` bits of the packed words.
  void append(std::span<const std::uint64_t> words, std::uint64_t nbits);
  std::uint64_t size() const noexcept { return size_; }
  BitStream finish(std::optional<StreamLayout> layout = std::nullopt) &&;

 private:
  std::vector<std::uint64_t> words_;
  std::uint64_t size_ = 0;
};

/// Per-qubit zero probabilities p_n(0). A single entry is broadcast to every qubit.
class QubitBiasProfile {
 public:
  /// Throws Domain unless every entry lies in [0, 1]; throws Layout when empty.
  explicit QubitBiasProfile(std::vector<double> zero_probs);
  static QubitBiasProfile scalar(double zero_prob) { return QubitBiasProfile({zero_prob}); }

  std::span<const double> zero_probs() const noexcept { return zero_probs_; }
  std::size_t size() const noexcept { return zero_probs_.size(); }
  bool is_scalar() const noexcept { return zero_probs_.size() == 1; }
  double zero_prob(std::size_t qubit) const noexcept {
    return is_scalar() ? zero_probs_.front() : zero_probs_[qubit];
  }

  /// Reads one probability per line, either `p0` or `qubit,p0`; a non-numeric header line is skipped.
  static QubitBiasProfile read_csv(const std::filesystem::path& path);

 private:
  std::vector<double> zero_probs_;
};

struct BitProbabilityReport {
  std::vector<double> per_qubit;  // estimated p_n(0)
  double aggregate_mean = 0.0;    // p̄(0)
  double aggregate_std = 0.0;     // population std of per_qubit
  std::uint64_t sample_counts = 0;  // bits per qubit, M/N
};

/// Counter-based Bernoulli bit generator. The stream is cut into chunks of
/// kChunkBits; chunk c draws from its own xoshiro256++ keyed by (seed, c), so
/// any chunk can be produced independently and thread count never changes output.
class BernoulliBitEngine {
 public:
  static constexpr std::uint64_t kChunkBits = std::uint64_t{1} << 16;
  static constexpr std::uint64_t kChunkWords = kChunkBits / 64;

  /// `num_qubits` sets the period of the per-qubit cycle; a scalar profile ignores it.
  BernoulliBitEngine(const QubitBiasProfile& profile, std::uint64_t num_qubits, std::uint64_t seed);

  /// Fills exactly kChunkWords words with chunk `chunk_index`.
  void fill_chunk(std::uint64_t chunk_index, std::span<std::uint64_t> words) const;

 private:
  struct Threshold {
    std::uint64_t below = 0;  // bit is 1 when the draw is < below
    bool always_one = false;
  };
  std::vector<Threshold> thresholds_;
  std::uint64_t seed_;
};

/// Bit at index n + s*N is 1 with probability 1 - p_n(0). Deterministic in (profile, layout, seed).
BitStream generate_bits(const QubitBiasProfile& profile, const StreamLayout& layout, std::uint64_t seed);

/// b_n: every N-th bit starting at qubit n; the result has layout (1, S, R).
BitStream qubit_stream(const BitStream& stream, std::uint64_t qubit);

/// Inverse of qubit_stream over all qubits.
BitStream interleave_qubits(std::span<const BitStream> per_qubit, const StreamLayout& layout);

struct RunCounts {
  std::uint64_t runs = 0;
  std::uint64_t zeros = 0;
  std::uint64_t ones = 0;
  std::uint64_t length() const noexcept { return zeros + ones; }
};

/// Incremental per-qubit and whole-stream counters (zeros, ones, runs). Feeding
/// a stream in arbitrary chunks gives the same totals as feeding it at once.
class BitTally {
 public:
  explicit BitTally(std::uint64_t num_qubits);

  void feed(std::span<const std::uint64_t> words, std::uint64_t nbits);
  void feed(const BitStream& stream) { feed(stream.words(), stream.size()); }

  std::uint64_t bits_seen() const noexcept { return whole_.length(); }
  std::uint64_t num_qubits() const noexcept { return per_qubit_.size(); }
  std::span<const RunCounts> per_qubit() const noexcept { return per_qubit_; }
  const RunCounts& whole() const noexcept { return whole_; }

 private:
  std::vector<RunCounts> per_qubit_;
  std::vector<std::int8_t> last_bit_;
  RunCounts whole_;
  int whole_last_ = -1;
  std::uint64_t next_qubit_ = 0;
};

BitProbabilityReport estimate_bit_probabilities(const BitStream& stream);
/// Builds the report from a tally over a stream with the given layout.
BitProbabilityReport bit_probabilities_from_tally(const BitTally& tally);

// ---------------------------------------------------------------------------
// Files

/// packed: 8 bits per byte, LSB first, last byte zero padded; length lives in
/// the sidecar. ascii: '0'/'1' characters, whitespace ignored.
enum class BitFormat { Packed, Ascii };

const char* to_string(BitFormat format) noexcept;
/// Accepts "packed" or "ascii"; throws Usage otherwise.
BitFormat parse_bit_format(std::string_view name);

/// Key/value metadata stored next to a bit file as `<file>.meta`.
struct BitFileMeta {
  BitFormat format = BitFormat::Packed;
  std::uint64_t total_bits = 0;
  std::optional<StreamLayout> layout;
  std::string generator;
  std::optional<std::uint64_t> seed;
};

std::filesystem::path sidecar_path(const std::filesystem::path& data_path);
void write_sidecar(const std::filesystem::path& data_path, const BitFileMeta& meta);
/// Returns nullopt when no sidecar exists; throws Parse on malformed content.
std::optional<BitFileMeta> read_sidecar(const std::filesystem::path& data_path);

void write_bitfile(const BitStream& stream, const std::filesystem::path& path, BitFormat format,
                   const std::string& generator = {}, std::optional<std::uint64_t> seed = std::nullopt);

/// Format defaults to the sidecar's, else ascii. A supplied layout overrides the sidecar's.
BitStream parse_bitfile(const std::filesystem::path& path, std::optional<BitFormat> format = std::nullopt,
                        std::optional<StreamLayout> layout = std::nullopt);

/// Sequential chunked reader with bounded memory. For ascii files the total
/// length is only known once the file is exhausted.
class BitFileReader {
 public:
  static constexpr std::size_t kBufferBytes = std::size_t{1} << 20;

  BitFileReader(const std::filesystem::path& path, std::optional<BitFormat> format = std::nullopt,
                std::optional<StreamLayout> layout = std::nullopt);

  BitFormat format() const noexcept { return format_; }
  const std::optional<StreamLayout>& layout() const noexcept { return layout_; }
  /// Declared length (packed, or ascii with layout/sidecar); nullopt if unknown.
  std::optional<std::uint64_t> declared_bits() const noexcept { return declared_bits_; }
  std::uint64_t bits_read() const noexcept { return bits_read_; }

  /// Reads up to 64*words.size() bits into `words` (LSB-first, cleared first).
  /// Returns the number of bits stored; 0 means end of data. At end of an ascii
  /// file with a declared length, a mismatch throws Length.
  std::uint64_t read(std::span<std::uint64_t> words);

 private:
  std::uint64_t read_packed(std::span<std::uint64_t> words);
  std::uint64_t read_ascii(std::span<std::uint64_t> words);

  std::ifstream in_;
  BitFormat format_;
  std::optional<StreamLayout> layout_;
  std::optional<std::uint64_t> declared_bits_;
  std::uint64_t bits_read_ = 0;
  std::uint64_t byte_offset_ = 0;
  std::vector<char> buffer_;
  std::size_t buffer_pos_ = 0;
  std::size_t buffer_len_ = 0;
  bool eof_ = false;
};

}  // namespace qbias
