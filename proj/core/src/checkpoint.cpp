#include "miarn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace miarn::io {
namespace {

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint16_t u16() {
    auto b = bytes(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[0]) |
                                      (static_cast<std::uint8_t>(b[1]) << 8));
  }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

// Walks the section lengths after the magic and throws "truncated" when the
// file ends early. Run before the checksum so a short file is reported as such.
void check_complete(std::string_view after_magic) {
  Reader r(after_magic);
  r.u32();  // version
  r.bytes(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    r.bytes(r.u16());
    const std::uint8_t rank = r.u8();
    std::size_t n = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      const std::size_t dim = r.u32();
      if (dim != 0 && n > r.remaining() / dim) throw CheckpointError("checkpoint is truncated");
      n *= dim;
    }
    if (n > r.remaining() / 4) throw CheckpointError("checkpoint is truncated");
    r.bytes(n * 4);
  }
  r.u32();  // checksum
}

bool is_bias(std::string_view name) {
  const auto dot = name.rfind('.');
  return dot != std::string_view::npos && dot + 1 < name.size() && name[dot + 1] == 'b';
}

std::size_t parse_size(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  std::size_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw CheckpointError("checkpoint metadata '" + key + "' is not a number: " + s);
  }
  return v;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

constexpr const char* kReservedKeys[] = {"model", "n", "d", "k", "L", "vocab_size", "vocab"};

bool is_reserved(const std::string& key) {
  for (const char* k : kReservedKeys)
    if (key == k) return true;
  return false;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& cfg = ckpt.params.config();
  if (ckpt.vocab.size() != cfg.vocab_size) {
    throw CheckpointError("vocabulary has " + std::to_string(ckpt.vocab.size()) +
                          " entries but the model expects " + std::to_string(cfg.vocab_size));
  }
  std::ostringstream meta;
  meta << "model=" << model::to_string(cfg.kind) << '\n'
       << "n=" << cfg.embed_dim << '\n'
       << "d=" << cfg.hidden_dim << '\n'
       << "k=" << cfg.proj_dim << '\n'
       << "L=" << ckpt.max_len << '\n'
       << "vocab_size=" << cfg.vocab_size << '\n';
  for (const auto& [key, value] : ckpt.extra) {
    if (is_reserved(key) || key.find('=') != std::string::npos ||
        key.find('\n') != std::string::npos || value.find('\n') != std::string::npos) {
      throw CheckpointError("invalid checkpoint metadata entry '" + key + "'");
    }
    meta << key << '=' << value << '\n';
  }
  meta << "vocab=";
  bool first = true;
  for (const auto& t : ckpt.vocab.tokens()) {
    if (!first) meta << ' ';
    meta << t;
    first = false;
  }
  meta << '\n';

  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string meta_text = meta.str();
  w.u32(static_cast<std::uint32_t>(meta_text.size()));
  w.bytes(meta_text);
  const auto& entries = ckpt.params.entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& p : entries) {
    if (p.name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + p.name);
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    const auto& shape = p.value.shape();
    if (shape.size() > 0xFF) throw CheckpointError("tensor rank too large: " + p.name);
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto dim : shape) w.u32(static_cast<std::uint32_t>(dim));
    for (float v : p.value.data()) w.f32(v);
  }
  const std::uint32_t crc = crc32_of(std::string_view(w.str()).substr(kCheckpointMagic.size()));
  w.u32(crc);
  return std::move(w.str());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  if (bytes.size() < kCheckpointMagic.size() + 8) throw CheckpointError("checkpoint is truncated");
  Reader header(bytes.substr(kCheckpointMagic.size()));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  check_complete(bytes.substr(kCheckpointMagic.size()));
  const auto body = bytes.substr(kCheckpointMagic.size(), bytes.size() - kCheckpointMagic.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  const std::uint32_t stored_crc = tail.u32();

  Reader r(body);
  r.u32();  // version
  const std::uint32_t meta_len = r.u32();
  if (meta_len > r.remaining()) throw CheckpointError("checkpoint is truncated");
  if (crc32_of(body) != stored_crc) throw CheckpointError("checkpoint checksum mismatch");

  std::map<std::string, std::string> meta;
  {
    std::istringstream is{std::string(r.bytes(meta_len))};
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw CheckpointError("malformed metadata line: " + line);
      meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto kind_it = meta.find("model");
  if (kind_it == meta.end()) throw CheckpointError("checkpoint metadata lacks 'model'");
  const auto kind = model::parse_model_kind(kind_it->second);
  if (!kind) throw CheckpointError("unknown model kind '" + kind_it->second + "'");

  model::ModelConfig cfg{*kind, parse_size(meta, "vocab_size"), parse_size(meta, "n"),
                         parse_size(meta, "d"), parse_size(meta, "k")};
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint config: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.max_len = parse_size(meta, "L");
  ckpt.vocab = corpus::Vocabulary::from_tokens(split_words(meta["vocab"]));
  if (ckpt.vocab.size() != cfg.vocab_size) {
    throw CheckpointError("checkpoint vocabulary lists " + std::to_string(ckpt.vocab.size()) +
                          " entries but vocab_size is " + std::to_string(cfg.vocab_size));
  }
  for (auto& [key, value] : meta)
    if (!is_reserved(key)) ckpt.extra[key] = value;

  ckpt.params = model::ModelParams<float>(cfg);
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint16_t name_len = r.u16();
    std::string name(r.bytes(name_len));
    const std::uint8_t rank = r.u8();
    num::Shape shape(rank);
    for (auto& dim : shape) dim = r.u32();
    const std::size_t n = num::numel(shape);
    if (n * 4 > r.remaining()) throw CheckpointError("checkpoint is truncated");
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    ckpt.params.add(name, num::Tensor<float>(std::move(shape), std::move(values)), !is_bias(name));
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after tensor section");

  // The stored tensors must match the layout the config implies.
  Rng scratch(0);
  const auto expected = model::init_params(
      cfg, scratch, num::Tensor<float>({cfg.vocab_size, cfg.embed_dim}));
  const auto& got = ckpt.params.entries();
  if (got.size() != expected.entries().size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(got.size()) + " tensors, " +
                          model::to_string(cfg.kind) + " needs " +
                          std::to_string(expected.entries().size()));
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& want = expected.entries()[i];
    if (got[i].name != want.name || got[i].value.shape() != want.value.shape()) {
      throw CheckpointError("tensor '" + got[i].name + "' " + num::to_string(got[i].value.shape()) +
                            " does not match expected '" + want.name + "' " +
                            num::to_string(want.value.shape()));
    }
  }
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_vocab_size) {
  Checkpoint ckpt;
  try {
    ckpt = deserialize_checkpoint(read_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (expected_vocab_size && *expected_vocab_size != ckpt.vocab.size()) {
    throw CheckpointError(path.string() + ": vocabulary size mismatch: checkpoint has " +
                          std::to_string(ckpt.vocab.size()) + ", data expects " +
                          std::to_string(*expected_vocab_size));
  }
  return ckpt;
}

}  // namespace miarn::io
