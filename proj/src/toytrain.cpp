#include "qbias/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <variant>

#include "qbias/error.hpp"
#include "qbias/integers.hpp"

namespace qbias {

// ---------------------------------------------------------------------------
// RngSource

namespace {

struct GeneratorState {
  BernoulliBitEngine engine;
  double one_prob;
  std::uint64_t seed;
  std::vector<std::uint64_t> chunk = std::vector<std::uint64_t>(BernoulliBitEngine::kChunkWords);
  std::uint64_t next_chunk = 0;
  std::uint64_t bit_pos = BernoulliBitEngine::kChunkBits;  // forces a refill on first use

  bool take_bit() {
    if (bit_pos == BernoulliBitEngine::kChunkBits) {
      engine.fill_chunk(next_chunk++, chunk);
      bit_pos = 0;
    }
    const bool bit = (chunk[bit_pos >> 6] >> (bit_pos & 63)) & 1U;
    ++bit_pos;
    return bit;
  }
};

struct SequenceState {
  BitStream bits;
  std::string origin;
};

}  // namespace

struct RngSource::State {
  Kind kind;
  std::string label;
  unsigned word_bits;
  std::uint64_t max_value;
  std::uint64_t consumed = 0;
  std::variant<GeneratorState, SequenceState> impl;
};

RngSource::RngSource(std::unique_ptr<State> state) : state_(std::move(state)) {}
RngSource::RngSource(RngSource&&) noexcept = default;
RngSource& RngSource::operator=(RngSource&&) noexcept = default;
RngSource::~RngSource() = default;

RngSource RngSource::prng_unbiased(std::string label, std::uint64_t seed, unsigned word_bits) {
  auto src = prng_biased(std::move(label), 0.5, seed, word_bits);
  src.state_->kind = Kind::PrngUnbiased;
  return src;
}

RngSource RngSource::prng_biased(std::string label, double one_prob, std::uint64_t seed, unsigned word_bits) {
  if (!(one_prob >= 0.0 && one_prob <= 1.0)) fail(ErrorKind::Domain, "source bias must lie in [0, 1]");
  const WordBits wb(word_bits);
  GeneratorState gen{BernoulliBitEngine(QubitBiasProfile::scalar(1.0 - one_prob), 1, seed), one_prob, seed};
  return RngSource(std::make_unique<State>(
      State{Kind::PrngBiased, std::move(label), wb.value(), wb.max_value(), 0, std::move(gen)}));
}

RngSource RngSource::file_sequence(std::string label, const std::filesystem::path& path, unsigned word_bits,
                                   std::optional<BitFormat> format) {
  auto src = from_bits(std::move(label), parse_bitfile(path, format), word_bits);
  std::get<SequenceState>(src.state_->impl).origin = path.string();
  return src;
}

RngSource RngSource::from_bits(std::string label, BitStream bits, unsigned word_bits) {
  const WordBits wb(word_bits);
  return RngSource(std::make_unique<State>(State{Kind::FileSequence, std::move(label), wb.value(), wb.max_value(),
                                                 0, SequenceState{std::move(bits), "memory"}}));
}

RngSource::Kind RngSource::kind() const noexcept { return state_->kind; }
const std::string& RngSource::label() const noexcept { return state_->label; }
unsigned RngSource::word_bits() const noexcept { return state_->word_bits; }
std::uint64_t RngSource::consumed() const noexcept { return state_->consumed; }

std::string RngSource::description() const {
  std::ostringstream out;
  switch (state_->kind) {
    case Kind::PrngUnbiased:
      out << "prng seed=" << std::get<GeneratorState>(state_->impl).seed;
      break;
    case Kind::PrngBiased: {
      const auto& g = std::get<GeneratorState>(state_->impl);
      out << "biased p=" << g.one_prob << " seed=" << g.seed;
      break;
    }
    case Kind::FileSequence:
      out << "file " << std::get<SequenceState>(state_->impl).origin;
      break;
  }
  return out.str();
}

std::optional<std::uint64_t> RngSource::remaining() const noexcept {
  if (const auto* seq = std::get_if<SequenceState>(&state_->impl)) {
    return seq->bits.size() / state_->word_bits - state_->consumed;
  }
  return std::nullopt;
}

std::uint64_t RngSource::next_integer() {
  const unsigned c = state_->word_bits;
  std::uint64_t value = 0;
  if (auto* gen = std::get_if<GeneratorState>(&state_->impl)) {
    for (unsigned i = 0; i < c; ++i) value |= std::uint64_t{gen->take_bit()} << i;
  } else {
    const auto& seq = std::get<SequenceState>(state_->impl);
    if (*remaining() == 0) {
      fail(ErrorKind::Exhausted, "source '" + state_->label + "' exhausted after " +
                                     std::to_string(state_->consumed) + " integers");
    }
    const std::uint64_t start = state_->consumed * c;
    for (unsigned i = 0; i < c; ++i) value |= std::uint64_t{seq.bits[start + i]} << i;
  }
  ++state_->consumed;
  return value;
}

double RngSource::next_uniform() {
  return static_cast<double>(next_integer()) / static_cast<double>(state_->max_value);
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Usage, "bad number for " + key + ": '" + value + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value.front() == '-') throw std::invalid_argument(value);
    const auto v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Usage, "bad non-negative integer for " + key + ": '" + value + "'");
  }
}

}  // namespace

RngSource parse_source_spec(std::string_view spec, std::size_t index, unsigned word_bits) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorKind::Usage, "source spec must look like label=kind[:key=value...], got '" + std::string(spec) + "'");
  }
  std::string label(spec.substr(0, eq));
  auto parts = split(spec.substr(eq + 1), ':');
  const std::string kind = parts.front();

  std::uint64_t seed = index + 1;
  double p = kDefaultBiasedOneProb;
  std::optional<std::string> path;
  std::optional<BitFormat> format;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto kv = parts[i].find('=');
    if (kv == std::string::npos) fail(ErrorKind::Usage, "source option '" + parts[i] + "' is not key=value");
    const std::string key = parts[i].substr(0, kv);
    const std::string value = parts[i].substr(kv + 1);
    if (key == "seed") {
      seed = parse_uint(key, value);
    } else if (key == "p") {
      p = parse_double(key, value);
    } else if (key == "path") {
      path = value;
    } else if (key == "format") {
      format = parse_bit_format(value);
    } else {
      fail(ErrorKind::Usage, "unknown source option '" + key + "'");
    }
  }
  if (kind == "prng") return RngSource::prng_unbiased(std::move(label), seed, word_bits);
  if (kind == "biased") return RngSource::prng_biased(std::move(label), p, seed, word_bits);
  if (kind == "file") {
    if (!path) fail(ErrorKind::Usage, "file source '" + label + "' needs path=...");
    return RngSource::file_sequence(std::move(label), *path, word_bits, format);
  }
  fail(ErrorKind::Usage, "unknown source kind '" + kind + "' (expected prng, biased or file)");
}

std::vector<RngSource> parse_source_list(std::string_view specs, unsigned word_bits) {
  std::vector<RngSource> out;
  const auto items = split(specs, ',');
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].empty()) continue;
    out.push_back(parse_source_spec(items[i], i, word_bits));
  }
  if (out.empty()) fail(ErrorKind::Usage, "no RNG sources given");
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (out[i].label() == out[j].label()) fail(ErrorKind::Usage, "duplicate source label '" + out[i].label() + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization

double he_bound(std::size_t fan_in) {
  if (fan_in == 0) fail(ErrorKind::Domain, "fan_in must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in));
}

Matrix he_uniform_init(std::size_t fan_in, std::size_t fan_out, RngSource& source) {
  const double bound = he_bound(fan_in);
  Matrix m(fan_out, fan_in);
  for (double& w : m.data) w = bound * (2.0 * source.next_uniform() - 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (runs < 2) fail(ErrorKind::Usage, "runs must be >= 2");
  if (epochs < 1) fail(ErrorKind::Usage, "epochs must be >= 1");
  if (hidden < 1) fail(ErrorKind::Usage, "hidden must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Usage, "batch_size must be >= 1");
  if (train_size < 2 || test_size < 2) fail(ErrorKind::Usage, "train_size and test_size must be >= 2");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::Usage, "learning_rate must be >= 0");
  if (!(blob_std > 0.0)) fail(ErrorKind::Usage, "blob_std must be > 0");
  if (!std::isfinite(blob_separation) || !std::isfinite(blob_offset)) {
    fail(ErrorKind::Usage, "blob geometry must be finite");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::Usage, "alpha must lie in (0, 1)");
  if (word_bits < 1 || word_bits > 64) fail(ErrorKind::Usage, "word_bits must lie in [1, 64]");
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Usage, "config line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "runs") c.runs = parse_uint(key, value);
    else if (key == "epochs") c.epochs = parse_uint(key, value);
    else if (key == "hidden") c.hidden = parse_uint(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
    else if (key == "batch_size") c.batch_size = parse_uint(key, value);
    else if (key == "train_size") c.train_size = parse_uint(key, value);
    else if (key == "test_size") c.test_size = parse_uint(key, value);
    else if (key == "blob_separation") c.blob_separation = parse_double(key, value);
    else if (key == "blob_std") c.blob_std = parse_double(key, value);
    else if (key == "blob_offset") c.blob_offset = parse_double(key, value);
    else if (key == "base_seed") c.base_seed = parse_uint(key, value);
    else if (key == "alpha") c.alpha = parse_double(key, value);
    else if (key == "word_bits") c.word_bits = static_cast<unsigned>(parse_uint(key, value));
    else fail(ErrorKind::Usage, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
  return parse(in);
}

// ---------------------------------------------------------------------------
// Data and network

std::vector<Sample> make_blobs(std::size_t count, const ExperimentConfig& config, Xoshiro256pp& rng) {
  std::vector<Sample> out;
  out.reserve(count);
  const double diag = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.label = static_cast<int>(i % 2);
    const double along = config.blob_offset + (s.label ? 0.5 : -0.5) * config.blob_separation;
    s.x0 = along * diag + config.blob_std * rng.normal();
    s.x1 = along * diag + config.blob_std * rng.normal();
    out.push_back(s);
  }
  return out;
}

ToyNetwork::ToyNetwork(std::size_t hidden) : hidden_(hidden), params_(parameter_count_for(hidden), 0.0) {
  if (hidden == 0) fail(ErrorKind::Domain, "hidden width must be >= 1");
}

ToyNetwork ToyNetwork::initialize(std::size_t hidden, RngSource& source) {
  ToyNetwork net(hidden);
  auto out = net.params_.begin();
  auto draw = [&](std::size_t fan_in, std::size_t count) {
    // a bias vector is a fan_out x 1 slice with the layer's fan_in bound
    const double bound = he_bound(fan_in);
    for (std::size_t i = 0; i < count; ++i) *out++ = bound * (2.0 * source.next_uniform() - 1.0);
  };
  const Matrix w1 = he_uniform_init(2, hidden, source);
  out = std::copy(w1.data.begin(), w1.data.end(), out);
  draw(2, hidden);
  const Matrix w2 = he_uniform_init(hidden, 2, source);
  out = std::copy(w2.data.begin(), w2.data.end(), out);
  draw(hidden, 2);
  return net;
}

void ToyNetwork::forward(const Sample& s, std::span<double> hidden_act, double logits[2]) const {
  const double* w1 = params_.data();
  const double* b1 = w1 + 2 * hidden_;
  const double* w2 = b1 + hidden_;
  const double* b2 = w2 + 2 * hidden_;
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double pre = w1[2 * h] * s.x0 + w1[2 * h + 1] * s.x1 + b1[h];
    hidden_act[h] = pre > 0.0 ? pre : 0.0;
  }
  for (std::size_t o = 0; o < 2; ++o) {
    double z = b2[o];
    for (std::size_t h = 0; h < hidden_; ++h) z += w2[o * hidden_ + h] * hidden_act[h];
    logits[o] = z;
  }
}

double ToyNetwork::loss_and_gradient(std::span<const Sample> batch, std::span<double> grad) const {
  if (batch.empty()) fail(ErrorKind::Domain, "empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_.size()) fail(ErrorKind::Shape, "gradient buffer has the wrong size");
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const double* w2 = params_.data() + 3 * hidden_;
  double* g_w1 = want_grad ? grad.data() : nullptr;
  double* g_b1 = want_grad ? g_w1 + 2 * hidden_ : nullptr;
  double* g_w2 = want_grad ? g_b1 + hidden_ : nullptr;
  double* g_b2 = want_grad ? g_w2 + 2 * hidden_ : nullptr;

  std::vector<double> act(hidden_);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Sample& s : batch) {
    double logits[2];
    forward(s, act, logits);
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double log_z = m + std::log(e0 + e1);
    loss += (log_z - logits[s.label]) * scale;
    if (!want_grad) continue;

    const double prob[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
    double d_logit[2];
    for (int o = 0; o < 2; ++o) d_logit[o] = (prob[o] - (o == s.label ? 1.0 : 0.0)) * scale;
    for (std::size_t o = 0; o < 2; ++o) {
      g_b2[o] += d_logit[o];
      for (std::size_t h = 0; h < hidden_; ++h) g_w2[o * hidden_ + h] += d_logit[o] * act[h];
    }
    for (std::size_t h = 0; h < hidden_; ++h) {
      if (act[h] <= 0.0) continue;
      const double d_pre = d_logit[0] * w2[h] + d_logit[1] * w2[hidden_ + h];
      g_w1[2 * h] += d_pre * s.x0;
      g_w1[2 * h + 1] += d_pre * s.x1;
      g_b1[h] += d_pre;
    }
  }
  return loss;
}

int ToyNetwork::predict(const Sample& s) const {
  std::vector<double> act(hidden_);
  double logits[2];
  forward(s, act, logits);
  return logits[1] > logits[0] ? 1 : 0;
}

double ToyNetwork::accuracy(std::span<const Sample> data) const {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Sample& s : data) correct += predict(s) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double gradient_check(std::size_t hidden, std::size_t batch, std::uint64_t seed, double step, double floor) {
  Xoshiro256pp rng(seed);
  ToyNetwork net(hidden);
  for (double& p : net.parameters()) p = 2.0 * rng.uniform() - 1.0;
  std::vector<Sample> data(batch);
  for (auto& s : data) {
    s.x0 = 3.0 * rng.normal();
    s.x1 = 3.0 * rng.normal();
    s.label = static_cast<int>(rng.below(2));
  }
  std::vector<double> analytic(net.parameter_count());
  net.loss_and_gradient(data, analytic);

  double worst = 0.0;
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = net.loss_and_gradient(data, {});
    params[i] = saved - step;
    const double down = net.loss_and_gradient(data, {});
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<double> train_toy_network(const ExperimentConfig& config, RngSource& source, std::size_t run_index) {
  config.validate();
  Xoshiro256pp aux(derive_key(config.base_seed, run_index));
  const auto train = make_blobs(config.train_size, config, aux);
  const auto test = make_blobs(config.test_size, config, aux);

  ToyNetwork net = ToyNetwork::initialize(config.hidden, source);
  std::vector<double> grad(net.parameter_count());
  std::vector<std::size_t> order(train.size());
  std::vector<Sample> batch;
  batch.reserve(config.batch_size);

  std::vector<double> accuracy;
  accuracy.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[aux.below(i + 1)]);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      const double loss = net.loss_and_gradient(batch, grad);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::Diverged, "non-finite loss in run " + std::to_string(run_index) + ", epoch " +
                                      std::to_string(epoch + 1));
      }
      auto params = net.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i];
    }
    accuracy.push_back(net.accuracy(test));
  }
  return accuracy;
}

std::vector<RunMatrix> run_experiment(const ExperimentConfig& config, std::span<RngSource> sources) {
  config.validate();
  std::vector<RunMatrix> out;
  out.reserve(sources.size());
  for (RngSource& source : sources) {
    std::vector<double> values;
    values.reserve(config.runs * config.epochs);
    for (std::size_t run = 0; run < config.runs; ++run) {
      const auto curve = train_toy_network(config, source, run);
      values.insert(values.end(), curve.begin(), curve.end());
    }
    out.emplace_back(source.label(), config.runs, config.epochs, std::move(values));
  }
  return out;
}

}  // namespace qbias
