#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "qbias/bitstream.hpp"
#include "qbias/error.hpp"
#include "qbias/integers.hpp"
#include "qbias/random.hpp"
#include "test_util.hpp"

using namespace qbias;

namespace {

// Bin by linear search over k with exact integer comparisons.
std::uint32_t oracle_bin(std::uint64_t v, std::uint32_t K, unsigned C) {
  const unsigned __int128 xi = (C == 64) ? ~std::uint64_t{0} : (std::uint64_t{1} << C) - 1;
  if (v == xi) return K;
  for (std::uint32_t k = 1; k <= K; ++k) {
    if (static_cast<unsigned __int128>(v) * K < static_cast<unsigned __int128>(k) * xi) return k;
  }
  return K;
}

std::vector<long double> oracle_theory(double p, unsigned C, std::uint32_t K, std::uint64_t L) {
  std::vector<long double> c(K, 0.0L);
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << C); ++i) {
    const int w = std::popcount(i);
    c[oracle_bin(i, K, C) - 1] +=
        std::pow(static_cast<long double>(p), w) * std::pow(1.0L - static_cast<long double>(p), C - w);
  }
  for (auto& x : c) x *= L;
  return c;
}

}  // namespace

TEST(WordBits, RangeIsOneToSixtyFour) {
  EXPECT_QBIAS_ERROR(WordBits(0), ErrorKind::Domain);
  EXPECT_QBIAS_ERROR(WordBits(65), ErrorKind::Domain);
  EXPECT_EQ(WordBits(32).max_value(), 0xffffffffu);
  EXPECT_EQ(WordBits(64).max_value(), ~std::uint64_t{0});
}

TEST(BitsToIntegers, FirstBitIsLeastSignificant) {
  const auto s = BitStream::from_bits(std::vector<std::uint8_t>{1, 0, 0, 0, 0, 1, 0, 1, 1, 1});
  const auto seq = bits_to_integers(s, 4);
  ASSERT_EQ(seq.values.size(), 2u);  // two trailing bits dropped
  EXPECT_EQ(seq.values[0], 1u);
  EXPECT_EQ(seq.values[1], 0b1010u);
}

TEST(BitsToIntegers, MatchesDefinitionForRandomStreams) {
  Xoshiro256pp rng(5);
  std::vector<std::uint8_t> bits(3000);
  for (auto& b : bits) b = rng() & 1;
  const auto s = BitStream::from_bits(bits);
  for (unsigned C : {1u, 3u, 7u, 32u, 33u, 64u}) {
    const auto seq = bits_to_integers(s, C);
    ASSERT_EQ(seq.values.size(), bits.size() / C);
    for (std::size_t j = 0; j < seq.values.size(); ++j) {
      std::uint64_t v = 0;
      for (unsigned i = 0; i < C; ++i) v |= std::uint64_t{bits[C * j + i]} << i;
      ASSERT_EQ(seq.values[j], v) << "C=" << C << " j=" << j;
    }
  }
}

TEST(BinAssign, AgreesWithLinearSearchOracle) {
  for (unsigned C : {1u, 2u, 5u, 8u}) {
    for (std::uint32_t K : {1u, 2u, 3u, 4u, 7u, 250u}) {
      for (std::uint64_t v = 0; v < (std::uint64_t{1} << C); ++v) {
        ASSERT_EQ(bin_assign(v, K, C), oracle_bin(v, K, C)) << "C=" << C << " K=" << K << " v=" << v;
      }
    }
  }
}

TEST(BinAssign, EdgesAtLargeWidths) {
  EXPECT_EQ(bin_assign(0, 250, 32), 1u);
  EXPECT_EQ(bin_assign(0xffffffffu, 250, 32), 250u);
  EXPECT_EQ(bin_assign(~std::uint64_t{0}, 250, 64), 250u);
  EXPECT_EQ(bin_assign(std::uint64_t{1} << 63, 2, 64), 2u);
  EXPECT_EQ(bin_assign((std::uint64_t{1} << 63) - 1, 2, 64), 1u);
  EXPECT_QBIAS_ERROR(bin_assign(16, 4, 4), ErrorKind::Domain);
  EXPECT_QBIAS_ERROR(bin_assign(0, 0, 4), ErrorKind::Domain);
}

TEST(BinLowerBound, DelimitsBins) {
  for (unsigned C : {3u, 8u, 10u}) {
    for (std::uint32_t K : {1u, 3u, 7u, 250u}) {
      for (std::uint32_t k = 1; k <= K; ++k) {
        const auto lo = bin_lower_bound(k, K, C);
        const auto hi = bin_lower_bound(k + 1, K, C);
        for (std::uint64_t v = static_cast<std::uint64_t>(lo); v < static_cast<std::uint64_t>(hi); ++v) {
          ASSERT_EQ(bin_assign(v, K, C), k);
        }
      }
      EXPECT_EQ(bin_lower_bound(K + 1, K, C), static_cast<unsigned __int128>(1) << C);
    }
  }
}

TEST(Binomial, MatchesPascalTriangle) {
  std::vector<std::vector<std::uint64_t>> pascal(65);
  for (unsigned n = 0; n <= 64; ++n) {
    pascal[n].assign(n + 1, 1);
    for (unsigned k = 1; k < n; ++k) pascal[n][k] = pascal[n - 1][k - 1] + pascal[n - 1][k];
  }
  for (unsigned n = 0; n <= 64; ++n) {
    for (unsigned k = 0; k <= n; ++k) ASSERT_EQ(binomial(n, k), pascal[n][k]) << n << "," << k;
    EXPECT_EQ(binomial(n, n + 1), 0u);
  }
}

TEST(PopcountCountBelow, ExhaustiveForSmallWidths) {
  for (unsigned C = 1; C <= 12; ++C) {
    const std::uint64_t n = std::uint64_t{1} << C;
    std::vector<std::uint64_t> running(C + 1, 0);
    for (std::uint64_t x = 0; x <= n; ++x) {
      for (unsigned w = 0; w <= C; ++w) {
        ASSERT_EQ(popcount_count_below(x, w, C), running[w]) << "C=" << C << " x=" << x << " w=" << w;
      }
      if (x < n) ++running[std::popcount(x)];
    }
  }
}

TEST(PopcountCountBelow, FullRangeAndClamping) {
  EXPECT_EQ(popcount_count_below(static_cast<unsigned __int128>(1) << 32, 16, 32), binomial(32, 16));
  EXPECT_EQ(popcount_count_below(static_cast<unsigned __int128>(1) << 40, 16, 32), binomial(32, 16));
  EXPECT_EQ(popcount_count_below(static_cast<unsigned __int128>(1) << 64, 32, 64), binomial(64, 32));
  EXPECT_EQ(popcount_count_below(5, 7, 4), 0u);
}

TEST(TheoreticalHistogram, MatchesBruteForceSummation) {
  for (unsigned C : {4u, 8u, 12u}) {
    for (std::uint32_t K : {1u, 4u, 250u}) {
      for (double p : {0.0, 0.1, 0.3, 0.4888, 0.5, 0.7, 1.0}) {
        const auto h = theoretical_histogram(p, C, K, 1000);
        const auto oracle = oracle_theory(p, C, K, 1000);
        EXPECT_EQ(h.kind, HistogramKind::Theoretical);
        ASSERT_EQ(h.bin_counts.size(), K);
        for (std::uint32_t k = 0; k < K; ++k) {
          const long double scale = std::max(std::fabs(oracle[k]), 1e-300L);
          ASSERT_LE(std::fabs(h.bin_counts[k] - oracle[k]) / scale, 1e-9L)
              << "C=" << C << " K=" << K << " p=" << p << " k=" << k + 1;
        }
      }
    }
  }
}

TEST(TheoreticalHistogram, ConservesMassAtFullWidth) {
  for (double p : {0.4888, 0.5, 0.9}) {
    const auto h = theoretical_histogram(p, 32, 250, 9384960);
    const double mass = std::accumulate(h.bin_counts.begin(), h.bin_counts.end(), 0.0);
    EXPECT_NEAR(mass / 9384960.0, 1.0, 1e-12);
  }
}

TEST(TheoreticalHistogram, DegenerateProbabilities) {
  const auto zero = theoretical_histogram(0.0, 32, 250, 100);
  EXPECT_DOUBLE_EQ(zero.bin_counts.front(), 100.0);
  EXPECT_DOUBLE_EQ(std::accumulate(zero.bin_counts.begin() + 1, zero.bin_counts.end(), 0.0), 0.0);
  const auto one = theoretical_histogram(1.0, 32, 250, 100);
  EXPECT_DOUBLE_EQ(one.bin_counts.back(), 100.0);
  EXPECT_QBIAS_ERROR(theoretical_histogram(1.5, 8, 4, 1), ErrorKind::Domain);
}

TEST(TheoreticalHistogram, BiasShiftsMassTowardLowBins) {
  const auto h = theoretical_histogram(0.4888, 32, 250, 1000000);
  EXPECT_GT(h.bin_counts.front(), h.bin_counts.back());
  const auto max_it = std::max_element(h.bin_counts.begin(), h.bin_counts.end());
  EXPECT_EQ(max_it, h.bin_counts.begin());
}

TEST(Histogram, CountsValuesIntoBins) {
  IntegerSequence seq{{0, 1, 2, 3, 15, 15, 8}, 4};
  const auto h = histogram(seq, 4);
  EXPECT_EQ(h.total, 7u);
  EXPECT_EQ(h.bin_counts, (std::vector<double>{4, 0, 1, 2}));
  const auto n = h.normalized();
  EXPECT_DOUBLE_EQ(n[0], 4.0 / 7.0);
}

TEST(IntegerBinner, StreamingMatchesBatch) {
  Xoshiro256pp rng(12);
  std::vector<std::uint8_t> bits(10007);
  for (auto& b : bits) b = rng() & 1;
  const auto s = BitStream::from_bits(bits);
  for (unsigned C : {5u, 32u, 64u}) {
    const auto expected = histogram(bits_to_integers(s, C), 250);
    IntegerBinner binner(C, 250);
    std::size_t pos = 0, step = 1;
    while (pos < bits.size()) {
      const std::size_t n = std::min(bits.size() - pos, step);
      std::vector<std::uint64_t> words((n + 63) / 64, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (bits[pos + i]) words[i / 64] |= std::uint64_t{1} << (i % 64);
      }
      binner.feed(words, n);
      pos += n;
      step = step * 3 % 211 + 1;
    }
    const auto got = binner.result();
    EXPECT_EQ(got.total, expected.total) << C;
    EXPECT_EQ(got.bin_counts, expected.bin_counts) << C;
  }
}

TEST(HistogramCsv, HeaderAndPrecision) {
  IntegerHistogram m{{1, 2}, 3, HistogramKind::Measured};
  IntegerHistogram t{{1.5, 1.5}, 3, HistogramKind::Theoretical};
  std::ostringstream os;
  write_histogram_csv(os, m, &t);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,count,theory_count,normalized");
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos) << csv;
}
