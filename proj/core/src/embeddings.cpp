#include "miarn/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <vector>

namespace miarn::corpus {
namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    if (end > pos) fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

}  // namespace

num::Tensor<float> random_embeddings(std::size_t vocab_size, std::size_t n, Rng& init) {
  num::Tensor<float> e({vocab_size, n});
  for (auto& x : e.data()) {
    x = static_cast<float>(init.uniform(-kEmbeddingInitRange, kEmbeddingInitRange));
  }
  for (std::size_t j = 0; j < n && vocab_size > 0; ++j) e.at(Vocabulary::kPad, j) = 0.0f;
  return e;
}

num::Tensor<float> load_pretrained(std::istream& in, const Vocabulary& vocab, std::size_t n,
                                   Rng& init, const std::string& source) {
  num::Tensor<float> e = random_embeddings(vocab.size(), n, init);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (fields.size() != n + 1) {
      throw ParseError(source, lineno,
                       "expected token plus " + std::to_string(n) + " values, found " +
                           std::to_string(fields.size() - 1) + " values");
    }
    std::vector<float> values(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto f = fields[j + 1];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(source, lineno, "non-numeric value '" + std::string(f) + "'");
      }
      values[j] = static_cast<float>(v);
    }
    const std::string token(fields[0]);
    if (!vocab.contains(token)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(token));
    for (std::size_t j = 0; j < n; ++j) e.at(id, j) = values[j];
  }
  for (std::size_t j = 0; j < n; ++j) e.at(Vocabulary::kPad, j) = 0.0f;
  return e;
}

num::Tensor<float> load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab,
                                   std::size_t n, Rng& init) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_pretrained(in, vocab, n, init, path.string());
}

}  // namespace miarn::corpus
