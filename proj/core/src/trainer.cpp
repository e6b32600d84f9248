#include "miarn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "miarn/model.hpp"

namespace miarn::train {

model::ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  return {kind, vocab_size, embed_dim, hidden_dim, kind == ModelKind::miarn ? proj_dim : 0};
}

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  model_config(2).validate();
}

RmsProp::RmsProp(double learning_rate, double rho, double eps)
    : lr_(learning_rate), rho_(rho), eps_(eps) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("RMSProp learning rate must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("RMSProp decay must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("RMSProp epsilon must be positive");
}

void RmsProp::step(ModelParams<float>& params) {
  auto& entries = params.entries();
  if (acc_.empty()) {
    for (const auto& p : entries) acc_.emplace_back(p.value.size(), 0.0f);
  }
  if (acc_.size() != entries.size()) {
    throw std::invalid_argument("RMSProp state does not match the parameter set");
  }
  for (std::size_t pi = 0; pi < entries.size(); ++pi) {
    const auto& p = entries[pi];
    if (p.value.grad().size() != p.value.size() || acc_[pi].size() != p.value.size()) {
      throw std::invalid_argument("RMSProp: parameter '" + p.name + "' has no matching gradient");
    }
    for (float gi : p.value.grad()) {
      if (!std::isfinite(gi)) {
        throw std::runtime_error("non-finite gradient in parameter '" + p.name + "'");
      }
    }
  }
  const auto rho = static_cast<float>(rho_);
  const auto lr = static_cast<float>(lr_);
  const auto eps = static_cast<float>(eps_);
  for (std::size_t pi = 0; pi < entries.size(); ++pi) {
    auto w = entries[pi].value.data();
    auto gr = entries[pi].value.grad();
    auto& acc = acc_[pi];
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc[i] = rho * acc[i] + (1.0f - rho) * gr[i] * gr[i];
      w[i] -= lr * gr[i] / std::sqrt(acc[i] + eps);
    }
  }
  if (params.has("embedding")) {
    auto& e = params.get("embedding");
    for (std::size_t j = 0; j < e.cols(); ++j) e.at(corpus::Vocabulary::kPad, j) = 0.0f;
  }
}

std::size_t select_best_epoch(std::span<const double> dev_scores) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < dev_scores.size(); ++i) {
    if (best == 0 || dev_scores[i] > dev_scores[best - 1]) best = i + 1;
  }
  return best;
}

std::vector<int> predict_all(const ModelParams<float>& params,
                             std::span<const corpus::EncodedDoc> docs) {
  std::vector<int> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    num::Graph<float> g(false);
    out.push_back(model::predict(model::forward_doc(g, params, d.ids, d.valid_len).probs));
  }
  return out;
}

Metrics evaluate(const ModelParams<float>& params, std::span<const corpus::EncodedDoc> docs) {
  std::vector<int> labels;
  labels.reserve(docs.size());
  for (const auto& d : docs) labels.push_back(d.label);
  return compute_metrics(predict_all(params, docs), labels);
}

double train_step(ModelParams<float>& params, RmsProp& optimizer, const corpus::Batch& batch,
                  double lambda) {
  params.zero_grad();
  num::Graph<float> g;
  auto objective = model::batch_loss(g, params, batch, static_cast<float>(lambda));
  g.backward(objective);
  optimizer.step(params);
  return objective.item();
}

TrainResult train(const TrainConfig& config, std::span<const corpus::EncodedDoc> train_set,
                  std::span<const corpus::EncodedDoc> dev_set, ModelParams<float> initial,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || dev_set.empty()) {
    throw std::invalid_argument("training and development splits must be non-empty");
  }
  ModelParams<float> params = std::move(initial);
  params.set_requires_grad(true);
  RmsProp optimizer(config.learning_rate);
  Rng shuffle_seeds = Rng::stream(config.seed, "epoch-shuffle");

  TrainResult result;
  std::vector<double> dev_scores;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = corpus::make_batches(train_set, config.batch_size, shuffle_seeds.next());
    double total = 0.0;
    for (const auto& batch : batches) {
      total += train_step(params, optimizer, batch, config.lambda);
    }
    const Metrics dev = evaluate(params, dev_set);
    EpochRecord record{epoch, total / static_cast<double>(train_set.size()), dev.accuracy,
                       dev.macro.f1};
    dev_scores.push_back(record.dev_macro_f1);
    if (select_best_epoch(dev_scores) == epoch) {
      result.best = params.clone();
      result.best_epoch = epoch;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.best.set_requires_grad(false);
  return result;
}

TrainResult train(const TrainConfig& config, std::span<const corpus::EncodedDoc> train_set,
                  std::span<const corpus::EncodedDoc> dev_set, std::size_t vocab_size,
                  std::optional<num::Tensor<float>> embedding, const EpochCallback& on_epoch) {
  config.validate();
  Rng init = Rng::stream(config.seed, "init");
  auto params = model::init_params(config.model_config(vocab_size), init, std::move(embedding));
  return train(config, train_set, dev_set, std::move(params), on_epoch);
}

void write_history_row(std::ostream& out, const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\n", r.epoch, r.train_loss, r.dev_accuracy,
                r.dev_macro_f1);
  out << buf;
}

void write_history(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch\ttrain_loss\tdev_accuracy\tdev_macro_f1\n";
  for (const auto& r : history) write_history_row(out, r);
}

}  // namespace miarn::train
