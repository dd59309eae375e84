#pragma once

// C-bit integers built from a bit stream, their K-bin histogram on [0, 1]
// after division by xi = 2^C - 1, and the exact bin populations predicted by
// a Bernoulli process with a single success probability.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qbias/bitstream.hpp"

namespace qbias {

/// Word width in bits, 1..64.
class WordBits {
 public:
  /// Throws Domain outside [1, 64].
  explicit WordBits(unsigned bits);
  unsigned value() const noexcept { return bits_; }
  /// xi = 2^C - 1
  std::uint64_t max_value() const noexcept { return bits_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits_) - 1; }

 private:
  unsigned bits_;
};

struct IntegerSequence {
  std::vector<std::uint64_t> values;
  unsigned word_bits = 32;
};

enum class HistogramKind { Measured, Theoretical };

struct IntegerHistogram {
  std::vector<double> bin_counts;  // index k-1 holds bin k
  std::uint64_t total = 0;         // L
  HistogramKind kind = HistogramKind::Measured;

  std::size_t num_bins() const noexcept { return bin_counts.size(); }
  /// counts / total (all zero when total is 0).
  std::vector<double> normalized() const;
};

/// I_j = sum_i B_{C(j-1)+i+1} 2^i: the first bit of each chunk is the least
/// significant. Trailing bits that do not fill a word are dropped.
IntegerSequence bits_to_integers(const BitStream& stream, unsigned word_bits);

/// 1-based bin k with (k-1)/K <= value/xi < k/K; value == xi lands in bin K.
/// Exact integer arithmetic. Throws Domain if value > xi or K == 0.
std::uint32_t bin_assign(std::uint64_t value, std::uint32_t num_bins, unsigned word_bits);

/// Smallest integer in bin k (1-based), ceil((k-1) * xi / K). Bin k spans
/// [bin_lower_bound(k), bin_lower_bound(k+1)); bin K ends at xi.
unsigned __int128 bin_lower_bound(std::uint32_t k, std::uint32_t num_bins, unsigned word_bits);

IntegerHistogram histogram(const IntegerSequence& seq, std::uint32_t num_bins);

/// Number of integers in [0, x) with exactly `weight` set bits, for x <= 2^C.
/// Larger x are clamped to 2^C. Digit DP over the binary prefix of x.
std::uint64_t popcount_count_below(unsigned __int128 x, unsigned weight, unsigned word_bits);

/// binomial(n, k) for n <= 64 (exact in 64 bits).
std::uint64_t binomial(unsigned n, unsigned k);

/// c_k(p) = L * sum over integers i in bin k of p^popcount(i) (1-p)^(C-popcount(i)),
/// evaluated by weight class so the cost never depends on 2^C. p is the
/// success probability of a single bit (probability of a 1). Throws Domain for p outside [0, 1].
IntegerHistogram theoretical_histogram(double p, unsigned word_bits, std::uint32_t num_bins, std::uint64_t total);

/// Streaming conversion + histogramming; accepts bits in arbitrary chunks.
class IntegerBinner {
 public:
  IntegerBinner(unsigned word_bits, std::uint32_t num_bins);

  void feed(std::span<const std::uint64_t> words, std::uint64_t nbits);
  void feed(const BitStream& stream) { feed(stream.words(), stream.size()); }

  /// Histogram of the completed words so far (partial trailing word excluded).
  IntegerHistogram result() const;
  std::uint64_t integers_seen() const noexcept { return count_; }

 private:
  WordBits word_bits_;
  std::uint32_t num_bins_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t pending_ = 0;
  unsigned pending_bits_ = 0;
  std::uint64_t count_ = 0;
};

/// CSV with header `k,count[,theory_count],normalized`, 17 significant digits.
void write_histogram_csv(std::ostream& out, const IntegerHistogram& measured,
                         const IntegerHistogram* theory = nullptr);

}  // namespace qbias
