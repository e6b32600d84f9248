#include "miarn/metrics.hpp"

#include <stdexcept>
#include <string>

namespace miarn::train {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassScores class_scores(const ClassCounts& c) {
  ClassScores s;
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.recall = ratio(c.tp, c.tp + c.fn);
  const double pr = s.precision + s.recall;
  s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
  return s;
}

MacroScores macro_scores(const Confusion& confusion) {
  MacroScores m;
  for (const auto& counts : confusion) {
    const auto s = class_scores(counts);
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
  }
  m.precision /= 2.0;
  m.recall /= 2.0;
  m.f1 /= 2.0;
  return m;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  Metrics m;
  m.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) {
      throw std::invalid_argument("compute_metrics: labels and predictions must be 0 or 1");
    }
    if (y == p) ++m.correct;
    for (int c = 0; c < 2; ++c) {
      auto& k = m.confusion[static_cast<std::size_t>(c)];
      if (p == c && y == c) ++k.tp;
      else if (p == c) ++k.fp;
      else if (y == c) ++k.fn;
      else ++k.tn;
    }
  }
  m.accuracy = ratio(m.correct, m.total);
  for (std::size_t c = 0; c < 2; ++c) m.per_class[c] = class_scores(m.confusion[c]);
  m.macro = macro_scores(m.confusion);
  return m;
}

}  // namespace miarn::train
