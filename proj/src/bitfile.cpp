#include <algorithm>
#include <charconv>
#include <cstring>
#include <sstream>

#include "qbias/bitstream.hpp"
#include "qbias/error.hpp"

namespace qbias {

namespace fs = std::filesystem;

const char* to_string(BitFormat format) noexcept {
  return format == BitFormat::Packed ? "packed" : "ascii";
}

BitFormat parse_bit_format(std::string_view name) {
  if (name == "packed") return BitFormat::Packed;
  if (name == "ascii") return BitFormat::Ascii;
  fail(ErrorKind::Usage, "unknown bit file format '" + std::string(name) + "' (expected packed or ascii)");
}

fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  p += ".meta";
  return p;
}

void write_sidecar(const fs::path& data_path, const BitFileMeta& meta) {
  std::ofstream out(sidecar_path(data_path), std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + sidecar_path(data_path).string());
  out << "format=" << to_string(meta.format) << '\n';
  if (meta.layout) {
    out << "num_qubits=" << meta.layout->num_qubits << '\n'
        << "shots_per_experiment=" << meta.layout->shots_per_experiment << '\n'
        << "num_experiments=" << meta.layout->num_experiments << '\n';
  }
  out << "total_bits=" << meta.total_bits << '\n';
  if (!meta.generator.empty()) out << "generator=" << meta.generator << '\n';
  if (meta.seed) out << "seed=" << *meta.seed << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + sidecar_path(data_path).string());
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value, const fs::path& where) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    fail(ErrorKind::Parse, where.string() + ": bad integer for " + key + ": '" + value + "'");
  }
  return v;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::optional<BitFileMeta> read_sidecar(const fs::path& data_path) {
  const fs::path path = sidecar_path(data_path);
  std::ifstream in(path);
  if (!in) return std::nullopt;

  BitFileMeta meta;
  std::optional<std::uint64_t> n, s, r, total;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, path.string() + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "format") {
      try {
        meta.format = parse_bit_format(value);
      } catch (const Error& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
      }
    } else if (key == "num_qubits") {
      n = parse_u64(key, value, path);
    } else if (key == "shots_per_experiment") {
      s = parse_u64(key, value, path);
    } else if (key == "num_experiments") {
      r = parse_u64(key, value, path);
    } else if (key == "total_bits") {
      total = parse_u64(key, value, path);
    } else if (key == "generator") {
      meta.generator = value;
    } else if (key == "seed") {
      meta.seed = parse_u64(key, value, path);
    }
    // unknown keys are ignored for forward compatibility
  }
  if (n || s || r) {
    if (!(n && s && r)) fail(ErrorKind::Parse, path.string() + ": incomplete layout");
    meta.layout = StreamLayout{*n, *s, *r};
  }
  if (total) {
    meta.total_bits = *total;
  } else if (meta.layout) {
    meta.total_bits = meta.layout->total_bits();
  } else {
    fail(ErrorKind::Parse, path.string() + ": missing total_bits");
  }
  if (meta.layout && meta.layout->total_bits() != meta.total_bits) {
    fail(ErrorKind::Parse, path.string() + ": total_bits disagrees with layout");
  }
  return meta;
}

void write_bitfile(const BitStream& stream, const fs::path& path, BitFormat format, const std::string& generator,
                   std::optional<std::uint64_t> seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");

  const auto words = stream.words();
  const std::uint64_t nbits = stream.size();
  if (format == BitFormat::Packed) {
    const std::uint64_t nbytes = (nbits + 7) / 8;
    std::vector<char> buf;
    buf.reserve(std::min<std::uint64_t>(nbytes, BitFileReader::kBufferBytes));
    for (std::uint64_t b = 0; b < nbytes; ++b) {
      buf.push_back(static_cast<char>((words[b / 8] >> (8 * (b % 8))) & 0xFFU));
      if (buf.size() == BitFileReader::kBufferBytes) {
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
      }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  } else {
    constexpr std::uint64_t kLine = 64;
    std::string line;
    line.reserve(kLine + 1);
    for (std::uint64_t i = 0; i < nbits; i += kLine) {
      line.clear();
      const std::uint64_t end = std::min(nbits, i + kLine);
      for (std::uint64_t j = i; j < end; ++j) line.push_back(stream[j] ? '1' : '0');
      line.push_back('\n');
      out.write(line.data(), static_cast<std::streamsize>(line.size()));
    }
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());

  BitFileMeta meta;
  meta.format = format;
  meta.total_bits = nbits;
  meta.layout = stream.layout();
  meta.generator = generator;
  meta.seed = seed;
  write_sidecar(path, meta);
}

BitStream parse_bitfile(const fs::path& path, std::optional<BitFormat> format, std::optional<StreamLayout> layout) {
  BitFileReader reader(path, format, layout);
  BitStreamBuilder builder;
  if (auto declared = reader.declared_bits()) builder.reserve(*declared);
  std::vector<std::uint64_t> chunk(BitFileReader::kBufferBytes / 8);
  while (const auto got = reader.read(chunk)) builder.append(chunk, got);
  const auto layout_out = reader.layout();
  if (layout_out && layout_out->total_bits() != builder.size()) {
    fail(ErrorKind::Length, path.string() + ": " + std::to_string(builder.size()) + " bits but layout declares " +
                                std::to_string(layout_out->total_bits()));
  }
  return std::move(builder).finish(layout_out);
}

// ---------------------------------------------------------------------------

BitFileReader::BitFileReader(const fs::path& path, std::optional<BitFormat> format,
                             std::optional<StreamLayout> layout)
    : in_(path, std::ios::binary), layout_(layout) {
  if (!in_) fail(ErrorKind::Io, "cannot open " + path.string());
  const auto meta = read_sidecar(path);
  format_ = format.value_or(meta ? meta->format : BitFormat::Ascii);
  if (!layout_ && meta) layout_ = meta->layout;
  if (layout_) {
    declared_bits_ = layout_->total_bits();
    if (meta && meta->total_bits != *declared_bits_) {
      fail(ErrorKind::Layout, path.string() + ": supplied layout disagrees with sidecar total_bits");
    }
  } else if (meta) {
    declared_bits_ = meta->total_bits;
  }

  if (format_ == BitFormat::Packed) {
    if (!declared_bits_) {
      fail(ErrorKind::Usage, path.string() + ": packed file needs a sidecar or an explicit layout");
    }
    const auto size = fs::file_size(path);
    const auto expected = (*declared_bits_ + 7) / 8;
    if (size != expected) {
      fail(ErrorKind::Length, path.string() + ": packed file has " + std::to_string(size) + " bytes, expected " +
                                  std::to_string(expected) + " for " + std::to_string(*declared_bits_) + " bits");
    }
  }
  buffer_.resize(kBufferBytes);
}

std::uint64_t BitFileReader::read(std::span<std::uint64_t> words) {
  std::fill(words.begin(), words.end(), 0);
  if (words.empty()) return 0;
  return format_ == BitFormat::Packed ? read_packed(words) : read_ascii(words);
}

std::uint64_t BitFileReader::read_packed(std::span<std::uint64_t> words) {
  const std::uint64_t remaining = *declared_bits_ - bits_read_;
  const std::uint64_t want_bits = std::min<std::uint64_t>(remaining, 64 * words.size());
  if (want_bits == 0) return 0;
  // bits_read_ is always a multiple of 8 until the final read
  const std::uint64_t want_bytes = (want_bits + 7) / 8;
  std::vector<unsigned char> bytes(want_bytes);
  in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(want_bytes));
  if (static_cast<std::uint64_t>(in_.gcount()) != want_bytes) {
    fail(ErrorKind::Length, "packed file truncated at byte " + std::to_string(byte_offset_ + in_.gcount()));
  }
  for (std::uint64_t b = 0; b < want_bytes; ++b) {
    words[b / 8] |= static_cast<std::uint64_t>(bytes[b]) << (8 * (b % 8));
  }
  if (want_bits % 64 != 0) words[want_bits / 64] &= (std::uint64_t{1} << (want_bits % 64)) - 1;
  byte_offset_ += want_bytes;
  bits_read_ += want_bits;
  return want_bits;
}

std::uint64_t BitFileReader::read_ascii(std::span<std::uint64_t> words) {
  const std::uint64_t capacity = 64 * words.size();
  std::uint64_t got = 0;
  while (got < capacity) {
    if (buffer_pos_ == buffer_len_) {
      if (eof_) break;
      in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
      buffer_len_ = static_cast<std::size_t>(in_.gcount());
      buffer_pos_ = 0;
      if (buffer_len_ < buffer_.size()) eof_ = true;
      if (buffer_len_ == 0) break;
    }
    const char c = buffer_[buffer_pos_++];
    const std::uint64_t offset = byte_offset_++;
    switch (c) {
      case '1':
        words[got >> 6] |= std::uint64_t{1} << (got & 63);
        [[fallthrough]];
      case '0':
        ++got;
        break;
      case ' ':
      case '\t':
      case '\n':
      case '\r':
      case '\f':
      case '\v':
        break;
      default: {
        std::ostringstream msg;
        msg << "invalid character ";
        if (c >= 0x20 && c < 0x7F) {
          msg << "'" << c << "'";
        } else {
          msg << "0x" << std::hex << (static_cast<unsigned>(static_cast<unsigned char>(c)));
        }
        msg << std::dec << " at byte offset " << offset;
        fail(ErrorKind::Parse, msg.str());
      }
    }
  }
  bits_read_ += got;
  if (got == 0 && declared_bits_ && bits_read_ != *declared_bits_) {
    fail(ErrorKind::Length, "ascii file holds " + std::to_string(bits_read_) + " bits, declared " +
                                std::to_string(*declared_bits_));
  }
  return got;
}

}  // namespace qbias
