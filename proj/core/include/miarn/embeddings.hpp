#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "miarn/corpus.hpp"
#include "miarn/rng.hpp"
#include "miarn/tensor.hpp"

namespace miarn::corpus {

inline constexpr double kEmbeddingInitRange = 0.05;

/// |V| x n matrix with rows ~ U(-0.05, 0.05) and a zero PAD row.
num::Tensor<float> random_embeddings(std::size_t vocab_size, std::size_t n, Rng& init);

/**
 * Embedding matrix seeded from a whitespace-separated text file
 * ("token v1 ... vn" per line, GloVe style). All rows are drawn from `init`
 * first, then rows whose token appears in the file are overwritten and the
 * PAD row is zeroed last. Lines with the wrong number of values or
 * non-numeric fields raise ParseError with the line number.
 */
num::Tensor<float> load_pretrained(std::istream& in, const Vocabulary& vocab, std::size_t n,
                                   Rng& init, const std::string& source = "<stream>");
num::Tensor<float> load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab,
                                   std::size_t n, Rng& init);

}  // namespace miarn::corpus
