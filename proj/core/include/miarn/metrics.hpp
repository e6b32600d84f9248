#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace miarn::train {

/// One-vs-rest counts for a single class.
struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

using Confusion = std::array<ClassCounts, 2>;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Undefined ratios (zero denominators) are 0.
ClassScores class_scores(const ClassCounts& counts);

/// Unweighted mean of the per-class precision, recall and F1.
MacroScores macro_scores(const Confusion& confusion);

struct Metrics {
  Confusion confusion{};
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::array<ClassScores, 2> per_class{};
  MacroScores macro{};
};

/// Labels and predictions are 0/1 and of equal length.
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels);

}  // namespace miarn::train
