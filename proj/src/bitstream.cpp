#include "qbias/bitstream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "qbias/error.hpp"
#include "qbias/random.hpp"

namespace qbias {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Layout: return "layout";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Index: return "index";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Length: return "length";
    case ErrorKind::Io: return "io";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Exhausted: return "exhausted";
    case ErrorKind::Diverged: return "diverged";
  }
  return "unknown";
}

void StreamLayout::validate() const {
  if (num_qubits == 0 || shots_per_experiment == 0 || num_experiments == 0) {
    fail(ErrorKind::Layout, "layout fields must all be >= 1");
  }
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (shots_per_experiment > kMax / num_experiments ||
      num_qubits > kMax / (shots_per_experiment * num_experiments)) {
    fail(ErrorKind::Layout, "layout total bit count overflows 64 bits");
  }
}

std::uint64_t StreamLayout::total_bits() const {
  validate();
  return num_qubits * shots_per_experiment * num_experiments;
}

namespace {

void check_layout_matches(const std::optional<StreamLayout>& layout, std::uint64_t size) {
  if (!layout) return;
  if (layout->total_bits() != size) {
    std::ostringstream msg;
    msg << "stream has " << size << " bits but layout declares " << layout->total_bits();
    fail(ErrorKind::Layout, msg.str());
  }
}

}  // namespace

BitStream::BitStream(std::vector<std::uint64_t> words, std::uint64_t size,
                     std::optional<StreamLayout> layout)
    : words_(std::move(words)), size_(size), layout_(layout) {
  const auto need = (size_ + 63) / 64;
  if (words_.size() < need) fail(ErrorKind::Length, "word buffer shorter than bit count");
  words_.resize(need);
  if (size_ % 64 != 0) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
  check_layout_matches(layout_, size_);
}

BitStream BitStream::from_bits(std::span<const std::uint8_t> bits, std::optional<StreamLayout> layout) {
  BitStreamBuilder builder;
  builder.reserve(bits.size());
  for (auto b : bits) builder.push_back(b != 0);
  return std::move(builder).finish(layout);
}

bool BitStream::at(std::uint64_t i) const {
  if (i >= size_) {
    fail(ErrorKind::Index, "bit index " + std::to_string(i) + " out of range for stream of " +
                               std::to_string(size_) + " bits");
  }
  return (*this)[i];
}

const StreamLayout& BitStream::require_layout() const {
  if (!layout_) fail(ErrorKind::Usage, "operation requires a stream layout");
  return *layout_;
}

std::uint64_t BitStream::count_ones() const noexcept {
  std::uint64_t n = 0;
  for (auto w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
  return n;
}

BitStream BitStream::with_layout(std::optional<StreamLayout> layout) const {
  check_layout_matches(layout, size_);
  BitStream copy = *this;
  copy.layout_ = layout;
  return copy;
}

std::vector<std::uint8_t> BitStream::to_bits() const {
  std::vector<std::uint8_t> out(size_);
  for (std::uint64_t i = 0; i < size_; ++i) out[i] = (*this)[i] ? 1 : 0;
  return out;
}

void BitStreamBuilder::push_back(bool bit) {
  if (size_ % 64 == 0) words_.push_back(0);
  if (bit) words_.back() |= std::uint64_t{1} << (size_ % 64);
  ++size_;
}

void BitStreamBuilder::append(std::span<const std::uint64_t> words, std::uint64_t nbits) {
  if (nbits > 64 * words.size()) fail(ErrorKind::Length, "append: more bits than words supplied");
  const unsigned offset = size_ % 64;
  std::uint64_t remaining = nbits;
  for (std::size_t i = 0; remaining > 0; ++i) {
    const unsigned take = static_cast<unsigned>(std::min<std::uint64_t>(64, remaining));
    std::uint64_t w = words[i];
    if (take < 64) w &= (std::uint64_t{1} << take) - 1;
    if (offset == 0) {
      words_.push_back(w);
    } else {
      words_.back() |= w << offset;
      if (take > 64 - offset) words_.push_back(w >> (64 - offset));
    }
    size_ += take;
    remaining -= take;
  }
}

BitStream BitStreamBuilder::finish(std::optional<StreamLayout> layout) && {
  return BitStream(std::move(words_), size_, layout);
}

QubitBiasProfile::QubitBiasProfile(std::vector<double> zero_probs) : zero_probs_(std::move(zero_probs)) {
  if (zero_probs_.empty()) fail(ErrorKind::Layout, "bias profile must hold at least one probability");
  for (std::size_t n = 0; n < zero_probs_.size(); ++n) {
    const double p = zero_probs_[n];
    if (!(p >= 0.0 && p <= 1.0)) {
      std::ostringstream msg;
      msg << "zero probability for qubit " << n << " is " << p << ", outside [0, 1]";
      fail(ErrorKind::Domain, msg.str());
    }
  }
}

QubitBiasProfile QubitBiasProfile::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open bias profile " + path.string());
  std::vector<double> probs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      const double p = std::stod(field, &used);
      if (field.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(field);
      probs.push_back(p);
    } catch (const std::exception&) {
      if (probs.empty() && lineno == 1) continue;  // header
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": not a probability: " + line);
    }
  }
  return QubitBiasProfile(std::move(probs));
}

// ---------------------------------------------------------------------------
// Generation

BernoulliBitEngine::BernoulliBitEngine(const QubitBiasProfile& profile, std::uint64_t num_qubits,
                                       std::uint64_t seed)
    : seed_(seed) {
  const std::size_t period = profile.is_scalar() ? 1 : static_cast<std::size_t>(num_qubits);
  if (!profile.is_scalar() && profile.size() != num_qubits) {
    fail(ErrorKind::Layout, "bias profile has " + std::to_string(profile.size()) +
                                " entries but the layout has " + std::to_string(num_qubits) + " qubits");
  }
  thresholds_.resize(period);
  for (std::size_t n = 0; n < period; ++n) {
    const double one_prob = 1.0 - profile.zero_prob(n);
    Threshold& t = thresholds_[n];
    if (one_prob >= 1.0) {
      t.always_one = true;
    } else if (one_prob > 0.0) {
      // exact: scaling by a power of two, result < 2^64
      t.below = static_cast<std::uint64_t>(std::ldexp(one_prob, 64));
    }
  }
}

void BernoulliBitEngine::fill_chunk(std::uint64_t chunk_index, std::span<std::uint64_t> words) const {
  Xoshiro256pp rng(derive_key(seed_, chunk_index));
  const std::uint64_t period = thresholds_.size();
  if (period == 1) {
    const Threshold t = thresholds_.front();
    for (auto& word : words) {
      std::uint64_t w = 0;
      for (unsigned b = 0; b < 64; ++b) {
        const bool bit = (rng() < t.below) || t.always_one;
        w |= std::uint64_t{bit} << b;
      }
      word = w;
    }
    return;
  }
  std::uint64_t qubit = (chunk_index % period) * (kChunkBits % period) % period;
  for (auto& word : words) {
    std::uint64_t w = 0;
    for (unsigned b = 0; b < 64; ++b) {
      const Threshold& t = thresholds_[qubit];
      const bool bit = (rng() < t.below) || t.always_one;
      w |= std::uint64_t{bit} << b;
      if (++qubit == period) qubit = 0;
    }
    word = w;
  }
}

BitStream generate_bits(const QubitBiasProfile& profile, const StreamLayout& layout, std::uint64_t seed) {
  const std::uint64_t total = layout.total_bits();
  const BernoulliBitEngine engine(profile, layout.num_qubits, seed);

  using Engine = BernoulliBitEngine;
  const std::uint64_t num_chunks = (total + Engine::kChunkBits - 1) / Engine::kChunkBits;
  std::vector<std::uint64_t> words(num_chunks * Engine::kChunkWords);

  auto work = [&](std::uint64_t first, std::uint64_t stride) {
    for (std::uint64_t c = first; c < num_chunks; c += stride) {
      engine.fill_chunk(c, std::span(words).subspan(c * Engine::kChunkWords, Engine::kChunkWords));
    }
  };
  const std::uint64_t threads =
      std::min<std::uint64_t>(std::max(1U, std::thread::hardware_concurrency()), num_chunks);
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::uint64_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return BitStream(std::move(words), total, layout);
}

BitStream qubit_stream(const BitStream& stream, std::uint64_t qubit) {
  const StreamLayout& layout = stream.require_layout();
  const std::uint64_t n_qubits = layout.num_qubits;
  if (qubit >= n_qubits) {
    fail(ErrorKind::Index,
         "qubit index " + std::to_string(qubit) + " out of range for " + std::to_string(n_qubits) + " qubits");
  }
  const std::uint64_t count = layout.samples_per_qubit();
  std::vector<std::uint64_t> words((count + 63) / 64);
  for (std::uint64_t i = 0, pos = qubit; i < count; ++i, pos += n_qubits) {
    if (stream[pos]) words[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  return BitStream(std::move(words), count,
                   StreamLayout{1, layout.shots_per_experiment, layout.num_experiments});
}

BitStream interleave_qubits(std::span<const BitStream> per_qubit, const StreamLayout& layout) {
  const std::uint64_t total = layout.total_bits();
  if (per_qubit.size() != layout.num_qubits) {
    fail(ErrorKind::Layout, "interleave: expected " + std::to_string(layout.num_qubits) + " qubit streams");
  }
  const std::uint64_t count = layout.samples_per_qubit();
  for (const auto& q : per_qubit) {
    if (q.size() != count) fail(ErrorKind::Layout, "interleave: qubit stream length mismatch");
  }
  std::vector<std::uint64_t> words((total + 63) / 64);
  for (std::uint64_t n = 0; n < layout.num_qubits; ++n) {
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t pos = n + i * layout.num_qubits;
      if (per_qubit[n][i]) words[pos >> 6] |= std::uint64_t{1} << (pos & 63);
    }
  }
  return BitStream(std::move(words), total, layout);
}

// ---------------------------------------------------------------------------
// Tallies

BitTally::BitTally(std::uint64_t num_qubits) : per_qubit_(num_qubits), last_bit_(num_qubits, -1) {
  if (num_qubits == 0) fail(ErrorKind::Layout, "tally needs at least one qubit");
}

void BitTally::feed(std::span<const std::uint64_t> words, std::uint64_t nbits) {
  if (nbits > 64 * words.size()) fail(ErrorKind::Length, "feed: more bits than words supplied");
  const std::uint64_t period = per_qubit_.size();
  std::uint64_t qubit = next_qubit_;
  for (std::uint64_t i = 0; i < nbits; ++i) {
    const int bit = static_cast<int>((words[i >> 6] >> (i & 63)) & 1U);

    RunCounts& q = per_qubit_[qubit];
    (bit ? q.ones : q.zeros) += 1;
    q.runs += (last_bit_[qubit] != bit);
    last_bit_[qubit] = static_cast<std::int8_t>(bit);
    if (++qubit == period) qubit = 0;

    (bit ? whole_.ones : whole_.zeros) += 1;
    whole_.runs += (whole_last_ != bit);
    whole_last_ = bit;
  }
  next_qubit_ = qubit;
}

BitProbabilityReport bit_probabilities_from_tally(const BitTally& tally) {
  BitProbabilityReport report;
  const auto qubits = tally.per_qubit();
  report.per_qubit.reserve(qubits.size());
  report.sample_counts = qubits.front().length();
  for (const auto& q : qubits) {
    if (q.length() != report.sample_counts) {
      fail(ErrorKind::Layout, "stream length is not a multiple of the qubit count");
    }
    report.per_qubit.push_back(q.length() == 0 ? 0.0
                                               : static_cast<double>(q.zeros) / static_cast<double>(q.length()));
  }
  double sum = 0.0;
  for (double p : report.per_qubit) sum += p;
  report.aggregate_mean = sum / static_cast<double>(report.per_qubit.size());
  double sq = 0.0;
  for (double p : report.per_qubit) sq += (p - report.aggregate_mean) * (p - report.aggregate_mean);
  report.aggregate_std = std::sqrt(sq / static_cast<double>(report.per_qubit.size()));
  return report;
}

BitProbabilityReport estimate_bit_probabilities(const BitStream& stream) {
  const StreamLayout& layout = stream.require_layout();
  BitTally tally(layout.num_qubits);
  tally.feed(stream);
  return bit_probabilities_from_tally(tally);
}

}  // namespace qbias
