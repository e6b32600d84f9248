#include "miarn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "miarn/rng.hpp"
#include "miarn/tokenizer.hpp"

namespace miarn::corpus {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
      source_(std::move(source)),
      line_(line) {}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::none:
      return "none";
    case RejectReason::url:
      return "url";
    case RejectReason::length:
      return "length";
  }
  return "unknown";
}

std::vector<std::string> normalize(std::string_view text) {
  auto tokens = tokenize(text);
  for (auto& t : tokens) {
    if (t.size() > 1 && t.front() == '@') t = std::string(kUserToken);
  }
  return tokens;
}

CleanResult clean(const RawDoc& doc) {
  if (lower(doc.text).find("http") != std::string::npos) {
    return {std::nullopt, RejectReason::url};
  }
  auto tokens = normalize(doc.text);
  if (tokens.size() < kMinTokens) return {std::nullopt, RejectReason::length};
  return {CleanDoc{doc.label, std::move(tokens)}, RejectReason::none};
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<std::int32_t>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const CleanDoc> docs, std::size_t min_count) {
  if (docs.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& doc : docs) {
    for (const auto& t : doc.tokens) {
      if (counts[t]++ == 0) order.push_back(t);
    }
  }
  Vocabulary vocab;
  for (auto& t : order) {
    if (counts[t] >= min_count && !vocab.contains(t)) vocab.add(std::move(t));
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  for (auto& t : tokens) {
    if (t.empty()) throw std::invalid_argument("vocabulary token must not be empty");
    if (vocab.contains(t)) throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
    vocab.add(std::move(t));
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line.find_first_of(" \t") != std::string::npos) {
      throw ParseError(path.string(), lineno, "expected a single token");
    }
    tokens.push_back(line);
  }
  try {
    return from_tokens(std::move(tokens));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string(), lineno, e.what());
  }
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens()) out << t << '\n';
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.find(std::string(token)) != token_to_id_.end();
}

EncodedDoc encode(std::span<const std::string> tokens, int label, const Vocabulary& vocab,
                  std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("encode: max_len must be positive");
  EncodedDoc doc;
  doc.label = label;
  doc.valid_len = std::min(tokens.size(), max_len);
  doc.ids.assign(max_len, Vocabulary::kPad);
  for (std::size_t i = 0; i < doc.valid_len; ++i) doc.ids[i] = vocab.id(tokens[i]);
  return doc;
}

std::vector<std::string> decode(const EncodedDoc& doc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(doc.valid_len);
  for (std::size_t i = 0; i < doc.valid_len; ++i) out.push_back(vocab.token(doc.ids[i]));
  return out;
}

Batch make_batch(std::span<const EncodedDoc> docs) {
  Batch b;
  if (docs.empty()) return b;
  b.max_len = docs.front().ids.size();
  b.ids.reserve(docs.size() * b.max_len);
  for (const auto& d : docs) {
    if (d.ids.size() != b.max_len) {
      throw std::invalid_argument("make_batch: documents encoded with different lengths");
    }
    b.ids.insert(b.ids.end(), d.ids.begin(), d.ids.end());
    b.valid_len.push_back(d.valid_len);
    b.labels.push_back(d.label);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const EncodedDoc> docs, std::size_t batch_size,
                                std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::stream(shuffle_seed, "shuffle");
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<Batch> batches;
  std::vector<EncodedDoc> chunk;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    chunk.clear();
    const std::size_t stop = std::min(order.size(), start + batch_size);
    for (std::size_t i = start; i < stop; ++i) chunk.push_back(docs[order[i]]);
    batches.push_back(make_batch(chunk));
  }
  return batches;
}

std::vector<RawDoc> parse_tsv(std::istream& in, const std::string& source) {
  std::vector<RawDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "missing TAB after label");
    const std::string_view label(line.data(), tab);
    if (label != "0" && label != "1") {
      throw ParseError(source, lineno, "label must be 0 or 1, got '" + std::string(label) + "'");
    }
    docs.push_back(RawDoc{label == "1" ? 1 : 0, line.substr(tab + 1)});
  }
  return docs;
}

std::vector<RawDoc> load_tsv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_tsv(in, path.string());
}

void write_encoded(std::ostream& out, const EncodedSplit& split) {
  out << "# miarn-encoded max_len=" << split.max_len << " vocab_size=" << split.vocab_size
      << " docs=" << split.docs.size() << '\n';
  for (const auto& d : split.docs) {
    out << d.label << '\t' << d.valid_len << '\t';
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
      if (i != 0) out << ' ';
      out << d.ids[i];
    }
    out << '\n';
  }
}

EncodedSplit read_encoded(std::istream& in, const std::string& source) {
  EncodedSplit split;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  strip_cr(line);
  std::size_t expected_docs = 0;
  {
    std::istringstream hs(line);
    std::string hash, magic;
    hs >> hash >> magic;
    if (hash != "#" || magic != "miarn-encoded") {
      throw ParseError(source, 1, "not an encoded split (bad header)");
    }
    std::string field;
    int seen = 0;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw ParseError(source, 1, "bad header field '" + field + "'");
      const std::string key = field.substr(0, eq);
      std::size_t value = 0;
      if (!parse_int(std::string_view(field).substr(eq + 1), value)) {
        throw ParseError(source, 1, "bad header value in '" + field + "'");
      }
      if (key == "max_len") split.max_len = value, seen |= 1;
      else if (key == "vocab_size") split.vocab_size = value, seen |= 2;
      else if (key == "docs") expected_docs = value, seen |= 4;
    }
    if (seen != 7 || split.max_len == 0) throw ParseError(source, 1, "incomplete header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError(source, lineno, "expected 3 TAB-separated fields");
    EncodedDoc d;
    const std::string_view view(line);
    if (!parse_int(view.substr(0, t1), d.label) || (d.label != 0 && d.label != 1)) {
      throw ParseError(source, lineno, "bad label");
    }
    if (!parse_int(view.substr(t1 + 1, t2 - t1 - 1), d.valid_len) || d.valid_len > split.max_len) {
      throw ParseError(source, lineno, "bad valid_len");
    }
    std::istringstream ids(line.substr(t2 + 1));
    std::string tok;
    while (ids >> tok) {
      std::int32_t id = 0;
      if (!parse_int(std::string_view(tok), id) || id < 0 ||
          static_cast<std::size_t>(id) >= split.vocab_size) {
        throw ParseError(source, lineno, "bad id '" + tok + "'");
      }
      d.ids.push_back(id);
    }
    if (d.ids.size() != split.max_len) {
      throw ParseError(source, lineno, "expected " + std::to_string(split.max_len) + " ids, found " +
                                           std::to_string(d.ids.size()));
    }
    split.docs.push_back(std::move(d));
  }
  if (split.docs.size() != expected_docs) {
    throw ParseError(source, lineno, "header announces " + std::to_string(expected_docs) +
                                         " docs, found " + std::to_string(split.docs.size()));
  }
  return split;
}

EncodedSplit load_encoded(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_encoded(in, path.string());
}

CleanedSplit clean_split(std::string name, std::span<const RawDoc> raw) {
  CleanedSplit out;
  out.stats.name = std::move(name);
  out.stats.total = raw.size();
  std::size_t token_total = 0;
  for (const auto& doc : raw) {
    auto res = clean(doc);
    switch (res.reason) {
      case RejectReason::url:
        ++out.stats.rejected_url;
        break;
      case RejectReason::length:
        ++out.stats.rejected_length;
        break;
      case RejectReason::none:
        token_total += res.doc->tokens.size();
        out.docs.push_back(std::move(*res.doc));
        break;
    }
  }
  out.stats.kept = out.docs.size();
  out.stats.avg_tokens =
      out.docs.empty() ? 0.0 : static_cast<double>(token_total) / static_cast<double>(out.docs.size());
  return out;
}

}  // namespace miarn::corpus
