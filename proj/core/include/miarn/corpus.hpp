#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace miarn::corpus {

/// Malformed input file; carries the offending source and 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message);
  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

struct RawDoc {
  int label = 0;  // 0 or 1
  std::string text;
};

struct CleanDoc {
  int label = 0;
  std::vector<std::string> tokens;
};

enum class RejectReason { none, url, length };

const char* to_string(RejectReason reason);

struct CleanResult {
  std::optional<CleanDoc> doc;
  RejectReason reason = RejectReason::none;

  [[nodiscard]] bool rejected() const { return !doc.has_value(); }
};

inline constexpr std::size_t kMinTokens = 5;
inline constexpr std::string_view kUserToken = "@USER";

/// Drops documents containing "http" (case-insensitive) or with fewer than
/// kMinTokens tokens; rewrites @mentions to "@USER".
CleanResult clean(const RawDoc& doc);

/// Tokenizes and rewrites mentions without applying the rejection rules.
std::vector<std::string> normalize(std::string_view text);

/**
 * Token <-> id map. Ids 0 and 1 are reserved for PAD and UNK; retained
 * tokens get consecutive ids from 2 in first-occurrence order.
 */
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Keeps tokens seen at least `min_count` times. Throws
  /// std::invalid_argument for an empty corpus.
  static Vocabulary build(std::span<const CleanDoc> docs, std::size_t min_count = 2);

  /// From non-reserved tokens in id order (id of tokens[i] is i + 2).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  /// One token per line; the token on line k has id k + 1.
  static Vocabulary load(const std::filesystem::path& path);
  void save(std::ostream& out) const;

  [[nodiscard]] std::int32_t id(std::string_view token) const;
  [[nodiscard]] const std::string& token(std::int32_t id) const;
  [[nodiscard]] bool contains(std::string_view token) const;
  [[nodiscard]] std::size_t size() const { return id_to_token_.size(); }

  /// Non-reserved tokens in id order.
  [[nodiscard]] std::span<const std::string> tokens() const {
    return std::span<const std::string>(id_to_token_).subspan(2);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void add(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
};

struct EncodedDoc {
  std::vector<std::int32_t> ids;  // length max_len, PAD after valid_len
  std::size_t valid_len = 0;
  int label = 0;

  friend bool operator==(const EncodedDoc&, const EncodedDoc&) = default;
};

/// Maps tokens to ids (UNK when absent), keeps the first max_len and pads.
EncodedDoc encode(std::span<const std::string> tokens, int label, const Vocabulary& vocab,
                  std::size_t max_len);

std::vector<std::string> decode(const EncodedDoc& doc, const Vocabulary& vocab);

struct Batch {
  std::size_t max_len = 0;
  std::vector<std::int32_t> ids;  // size() x max_len, row-major
  std::vector<std::size_t> valid_len;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::span<const std::int32_t> row(std::size_t i) const {
    return std::span<const std::int32_t>(ids).subspan(i * max_len, max_len);
  }
};

Batch make_batch(std::span<const EncodedDoc> docs);

/// Fisher-Yates shuffle driven by `shuffle_seed`, then contiguous chunks of
/// batch_size; the last batch may be short.
std::vector<Batch> make_batches(std::span<const EncodedDoc> docs, std::size_t batch_size,
                                std::uint64_t shuffle_seed);

/// "label<TAB>text" per line.
std::vector<RawDoc> parse_tsv(std::istream& in, const std::string& source = "<stream>");
std::vector<RawDoc> load_tsv(const std::filesystem::path& path);

struct EncodedSplit {
  std::size_t max_len = 0;
  std::size_t vocab_size = 0;
  std::vector<EncodedDoc> docs;
};

/**
 * Encoded split file: a header line
 *   # miarn-encoded max_len=<L> vocab_size=<V> docs=<N>
 * followed by one "label<TAB>valid_len<TAB>id id ... id" line (L ids) per doc.
 */
void write_encoded(std::ostream& out, const EncodedSplit& split);
EncodedSplit read_encoded(std::istream& in, const std::string& source = "<stream>");
EncodedSplit load_encoded(const std::filesystem::path& path);

struct SplitStats {
  std::string name;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t rejected_url = 0;
  std::size_t rejected_length = 0;
  double avg_tokens = 0.0;  // kept docs, before truncation
};

struct CleanedSplit {
  std::vector<CleanDoc> docs;
  SplitStats stats;
};

CleanedSplit clean_split(std::string name, std::span<const RawDoc> raw);

}  // namespace miarn::corpus
