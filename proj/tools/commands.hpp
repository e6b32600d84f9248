#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "miarn/checkpoint.hpp"
#include "miarn/corpus.hpp"
#include "miarn/metrics.hpp"
#include "miarn/model.hpp"
#include "miarn/trainer.hpp"

namespace miarn::cli {

namespace fs = std::filesystem;

/// Bad flag combination; main() maps it to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// prepare ------------------------------------------------------------------

struct PrepareOptions {
  fs::path train;
  fs::path dev;
  fs::path test;
  fs::path out_dir;
  std::size_t max_len = 40;
};

struct PrepareReport {
  std::vector<corpus::SplitStats> splits;
  std::size_t vocab_size = 0;
  std::size_t max_len = 0;
};

/// Writes vocab.txt, {train,dev,test}.enc and report.txt into out_dir.
PrepareReport cmd_prepare(const PrepareOptions& options);
std::string format_report(const PrepareReport& report);

// train --------------------------------------------------------------------

struct TrainOptions {
  train::TrainConfig config;
  std::optional<std::size_t> k;  // required for miarn, ignored otherwise
  fs::path data_dir;
  std::optional<fs::path> embeddings;
  fs::path out;
  std::optional<fs::path> history;  // defaults to <out>.history.tsv
};

/// Validates flags, trains, writes the checkpoint and history file.
/// Warnings and per-epoch progress go to `log`.
train::TrainResult cmd_train(const TrainOptions& options, std::ostream& log);

// eval ---------------------------------------------------------------------

struct EvalOptions {
  fs::path checkpoint;
  fs::path data;  // encoded split from `prepare`, or a raw label<TAB>text file
};

train::Metrics cmd_eval(const EvalOptions& options);

/// "P R F1 Acc" as percentages with two decimals (macro P/R/F1).
std::string format_metrics(const train::Metrics& metrics);

// attend -------------------------------------------------------------------

enum class RenderFormat { html, ansi };

struct AttendOptions {
  fs::path checkpoint;
  fs::path input;  // one document per line (optionally "label<TAB>text")
  RenderFormat format = RenderFormat::html;
};

std::vector<model::AttentionRecord> attention_records(const io::Checkpoint& ckpt,
                                                      const std::vector<std::string>& texts);
std::string cmd_attend(const AttendOptions& options);

/// Opacity a_i / max(a) per token; exactly one <span> per token.
std::string render_html(const std::vector<model::AttentionRecord>& records);
/// 8 background intensity levels per token, followed by audit lines.
std::string render_ansi(const std::vector<model::AttentionRecord>& records);

/// Intensity bucket 0..7 for a_i / max(a).
int intensity_level(double ratio);

/// "a: ..." and, when present, "s: i,j=value ..." over the unmasked upper
/// triangle.
std::string audit_lines(const model::AttentionRecord& record);

}  // namespace miarn::cli
