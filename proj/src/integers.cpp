#include "qbias/integers.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qbias/error.hpp"

namespace qbias {

namespace {

using u128 = unsigned __int128;

struct BinomialTable {
  std::array<std::array<std::uint64_t, 65>, 65> c{};
  BinomialTable() {
    for (unsigned n = 0; n <= 64; ++n) {
      c[n][0] = 1;
      for (unsigned k = 1; k <= n; ++k) c[n][k] = c[n - 1][k - 1] + (k <= n - 1 ? c[n - 1][k] : 0);
    }
  }
};

const BinomialTable& binomials() {
  static const BinomialTable table;
  return table;
}

u128 range_size(unsigned word_bits) { return u128{1} << word_bits; }

void check_bins(std::uint32_t num_bins) {
  if (num_bins == 0) fail(ErrorKind::Domain, "number of bins must be >= 1");
}

std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// counts[w] = #{ i in [0, x) : popcount(i) == w } for every w in 0..C.
void count_below_all_weights(u128 x, unsigned word_bits, std::span<std::uint64_t> counts) {
  std::fill(counts.begin(), counts.end(), 0);
  const auto& c = binomials().c;
  if (x >= range_size(word_bits)) {
    for (unsigned w = 0; w <= word_bits; ++w) counts[w] = c[word_bits][w];
    return;
  }
  unsigned ones = 0;
  for (int bit = static_cast<int>(word_bits) - 1; bit >= 0; --bit) {
    if ((x >> bit) & 1U) {
      // prefix matches x above `bit`, this bit is 0, lower `bit` bits free
      for (unsigned j = 0; j <= static_cast<unsigned>(bit); ++j) counts[ones + j] += c[bit][j];
      ++ones;
    }
  }
}

}  // namespace

WordBits::WordBits(unsigned bits) : bits_(bits) {
  if (bits < 1 || bits > 64) fail(ErrorKind::Domain, "word bits must lie in [1, 64], got " + std::to_string(bits));
}

std::uint64_t binomial(unsigned n, unsigned k) {
  if (n > 64) fail(ErrorKind::Domain, "binomial table supports n <= 64");
  return k > n ? 0 : binomials().c[n][k];
}

std::vector<double> IntegerHistogram::normalized() const {
  std::vector<double> out(bin_counts.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = bin_counts[k] / static_cast<double>(total);
  return out;
}

IntegerSequence bits_to_integers(const BitStream& stream, unsigned word_bits) {
  const WordBits wb(word_bits);
  const unsigned c = wb.value();
  const std::uint64_t mask = wb.max_value();
  const std::uint64_t count = stream.size() / c;
  const auto words = stream.words();

  IntegerSequence seq;
  seq.word_bits = c;
  seq.values.resize(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t pos = j * c;
    const std::uint64_t w = pos >> 6;
    const unsigned off = pos & 63;
    std::uint64_t v = words[w] >> off;
    if (off + c > 64) v |= words[w + 1] << (64 - off);
    seq.values[j] = v & mask;
  }
  return seq;
}

std::uint32_t bin_assign(std::uint64_t value, std::uint32_t num_bins, unsigned word_bits) {
  check_bins(num_bins);
  const WordBits wb(word_bits);
  const std::uint64_t xi = wb.max_value();
  if (value > xi) {
    fail(ErrorKind::Domain,
         "value " + std::to_string(value) + " exceeds the " + std::to_string(word_bits) + "-bit maximum");
  }
  // (k-1) = floor(value*K / xi)
  std::uint64_t k0;
  if (word_bits <= 32) {
    k0 = value * num_bins / xi;
  } else {
    k0 = static_cast<std::uint64_t>(static_cast<u128>(value) * num_bins / xi);
  }
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(k0 + 1, num_bins));
}

u128 bin_lower_bound(std::uint32_t k, std::uint32_t num_bins, unsigned word_bits) {
  check_bins(num_bins);
  const WordBits wb(word_bits);
  if (k < 1 || k > num_bins + 1) fail(ErrorKind::Index, "bin index out of range");
  if (k == num_bins + 1) return range_size(wb.value());
  const u128 num = static_cast<u128>(k - 1) * wb.max_value();
  return (num + num_bins - 1) / num_bins;
}

IntegerHistogram histogram(const IntegerSequence& seq, std::uint32_t num_bins) {
  check_bins(num_bins);
  std::vector<std::uint64_t> counts(num_bins, 0);
  for (auto v : seq.values) ++counts[bin_assign(v, num_bins, seq.word_bits) - 1];
  IntegerHistogram h;
  h.kind = HistogramKind::Measured;
  h.total = seq.values.size();
  h.bin_counts.assign(counts.begin(), counts.end());
  return h;
}

std::uint64_t popcount_count_below(u128 x, unsigned weight, unsigned word_bits) {
  const WordBits wb(word_bits);
  if (weight > wb.value()) return 0;
  const auto& c = binomials().c;
  if (x >= range_size(wb.value())) return c[wb.value()][weight];
  std::uint64_t count = 0;
  unsigned ones = 0;
  for (int bit = static_cast<int>(wb.value()) - 1; bit >= 0 && ones <= weight; --bit) {
    if ((x >> bit) & 1U) {
      count += c[bit][weight - ones];
      ++ones;
    }
  }
  return count;
}

IntegerHistogram theoretical_histogram(double p, unsigned word_bits, std::uint32_t num_bins, std::uint64_t total) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Domain, "success probability must lie in [0, 1]");
  check_bins(num_bins);
  const unsigned c = WordBits(word_bits).value();

  // P(weight w) for a single integer, computed in log space
  std::vector<double> prob(c + 1);
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  for (unsigned w = 0; w <= c; ++w) {
    const double lp = (w > 0 ? w * log_p : 0.0) + (c - w > 0 ? (c - w) * log_q : 0.0);
    prob[w] = std::exp(lp);
  }

  IntegerHistogram h;
  h.kind = HistogramKind::Theoretical;
  h.total = total;
  h.bin_counts.assign(num_bins, 0.0);

  std::vector<std::uint64_t> lower(c + 1), upper(c + 1);
  count_below_all_weights(bin_lower_bound(1, num_bins, c), c, lower);
  for (std::uint32_t k = 1; k <= num_bins; ++k) {
    count_below_all_weights(bin_lower_bound(k + 1, num_bins, c), c, upper);
    double mass = 0.0;
    for (unsigned w = 0; w <= c; ++w) {
      const std::uint64_t n_k = upper[w] - lower[w];
      if (n_k != 0) mass += static_cast<double>(n_k) * prob[w];
    }
    h.bin_counts[k - 1] = static_cast<double>(total) * mass;
    std::swap(lower, upper);
  }
  return h;
}

IntegerBinner::IntegerBinner(unsigned word_bits, std::uint32_t num_bins)
    : word_bits_(word_bits), num_bins_(num_bins), counts_(num_bins, 0) {
  check_bins(num_bins);
}

void IntegerBinner::feed(std::span<const std::uint64_t> words, std::uint64_t nbits) {
  if (nbits > 64 * words.size()) fail(ErrorKind::Length, "feed: more bits than words supplied");
  const unsigned c = word_bits_.value();
  std::uint64_t pos = 0;
  while (pos < nbits) {
    const unsigned need = c - pending_bits_;
    const unsigned off = pos & 63;
    const unsigned avail_in_word = 64 - off;
    const unsigned take =
        static_cast<unsigned>(std::min<std::uint64_t>({need, avail_in_word, nbits - pos}));
    std::uint64_t piece = words[pos >> 6] >> off;
    if (take < 64) piece &= (std::uint64_t{1} << take) - 1;
    pending_ |= piece << pending_bits_;
    pending_bits_ += take;
    pos += take;
    if (pending_bits_ == c) {
      ++counts_[bin_assign(pending_, num_bins_, c) - 1];
      ++count_;
      pending_ = 0;
      pending_bits_ = 0;
    }
  }
}

IntegerHistogram IntegerBinner::result() const {
  IntegerHistogram h;
  h.kind = HistogramKind::Measured;
  h.total = count_;
  h.bin_counts.assign(counts_.begin(), counts_.end());
  return h;
}

void write_histogram_csv(std::ostream& out, const IntegerHistogram& measured, const IntegerHistogram* theory) {
  if (theory && theory->num_bins() != measured.num_bins()) {
    fail(ErrorKind::Shape, "theory histogram has a different bin count");
  }
  out << (theory ? "k,count,theory_count,normalized\n" : "k,count,normalized\n");
  const auto norm = measured.normalized();
  for (std::size_t k = 0; k < measured.num_bins(); ++k) {
    out << (k + 1) << ',' << format_g17(measured.bin_counts[k]) << ',';
    if (theory) out << format_g17(theory->bin_counts[k]) << ',';
    out << format_g17(norm[k]) << '\n';
  }
}

}  // namespace qbias
