#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "miarn/corpus.hpp"
#include "miarn/metrics.hpp"
#include "miarn/params.hpp"

namespace miarn::train {

using model::ModelKind;
using model::ModelParams;

/// Defaults follow the published training protocol.
struct TrainConfig {
  ModelKind kind = ModelKind::miarn;
  std::size_t embed_dim = 100;   // n
  std::size_t hidden_dim = 100;  // d
  std::size_t proj_dim = 0;      // k, miarn only
  double lambda = 1e-8;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;

  [[nodiscard]] model::ModelConfig model_config(std::size_t vocab_size) const;
  void validate() const;
};

/// acc <- rho acc + (1 - rho) g^2;  w <- w - lr g / sqrt(acc + eps)
class RmsProp {
 public:
  static constexpr double kDefaultRho = 0.9;
  static constexpr double kDefaultEps = 1e-8;

  explicit RmsProp(double learning_rate, double rho = kDefaultRho, double eps = kDefaultEps);

  /// Applies one update from the gradients held by `params`. Non-finite
  /// gradients abort before any weight changes, naming the parameter. The
  /// PAD row of "embedding" is forced back to zero.
  void step(ModelParams<float>& params);

  [[nodiscard]] const std::vector<std::vector<float>>& accumulators() const { return acc_; }
  [[nodiscard]] double learning_rate() const { return lr_; }

 private:
  double lr_;
  double rho_;
  double eps_;
  std::vector<std::vector<float>> acc_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean objective per training document
  double dev_accuracy = 0.0;
  double dev_macro_f1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ModelParams<float> best;
  std::size_t best_epoch = 0;  // 1-based
  std::vector<EpochRecord> history;
};

/// 1-based index of the first maximum; 0 for an empty sequence.
std::size_t select_best_epoch(std::span<const double> dev_scores);

std::vector<int> predict_all(const ModelParams<float>& params,
                             std::span<const corpus::EncodedDoc> docs);

Metrics evaluate(const ModelParams<float>& params, std::span<const corpus::EncodedDoc> docs);

/// One optimizer step on `batch`; returns the objective before the update.
double train_step(ModelParams<float>& params, RmsProp& optimizer, const corpus::Batch& batch,
                  double lambda);

using EpochCallback = std::function<void(const EpochRecord&)>;

/**
 * Runs config.epochs epochs of shuffled mini-batch RMSProp from `initial`.
 * After every epoch the dev set is scored; the parameters of the epoch with
 * the highest dev macro-F1 are returned (earliest epoch on ties).
 */
TrainResult train(const TrainConfig& config, std::span<const corpus::EncodedDoc> train_set,
                  std::span<const corpus::EncodedDoc> dev_set, ModelParams<float> initial,
                  const EpochCallback& on_epoch = {});

/// As above, initializing parameters from the config seed ("init" stream).
TrainResult train(const TrainConfig& config, std::span<const corpus::EncodedDoc> train_set,
                  std::span<const corpus::EncodedDoc> dev_set, std::size_t vocab_size,
                  std::optional<num::Tensor<float>> embedding = std::nullopt,
                  const EpochCallback& on_epoch = {});

/// Header line, then "epoch<TAB>train_loss<TAB>dev_accuracy<TAB>dev_macro_f1".
void write_history(std::ostream& out, std::span<const EpochRecord> history);
void write_history_row(std::ostream& out, const EpochRecord& record);

}  // namespace miarn::train
