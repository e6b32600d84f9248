#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "miarn/corpus.hpp"
#include "miarn/params.hpp"

namespace miarn::io {

inline constexpr std::string_view kCheckpointMagic = "MIARNCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trained model plus what is needed to run it on raw text.
struct Checkpoint {
  model::ModelParams<float> params;
  std::size_t max_len = 0;  // L
  corpus::Vocabulary vocab;
  std::map<std::string, std::string> extra;  // free-form config echo
};

/**
 * Byte layout (integers little-endian):
 *   "MIARNCKP" | u32 version | u32 metadata bytes | metadata (UTF-8
 *   "key=value\n" lines: model, n, d, k, L, vocab_size, vocab, ...) |
 *   u32 tensor count | per tensor: u16 name length, name, u8 rank,
 *   u32 dims[rank], f32 values | u32 CRC-32 of every byte between the
 *   magic and the checksum.
 */
std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Throws CheckpointError on bad magic, unsupported version, truncation,
/// checksum mismatch or inconsistent contents.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// When `expected_vocab_size` is given it must match the stored vocabulary.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_vocab_size = std::nullopt);

/// Replaces `path` atomically with `contents`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace miarn::io
