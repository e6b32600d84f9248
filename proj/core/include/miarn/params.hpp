#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "miarn/rng.hpp"
#include "miarn/tensor.hpp"

namespace miarn::model {

using num::Tensor;

enum class ModelKind { siarn, miarn, nbow, lstm, attlstm };

const char* to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);
bool has_attention(ModelKind kind);
bool has_intra_attention(ModelKind kind);
bool has_lstm(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::miarn;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;   // n
  std::size_t hidden_dim = 100;  // d
  std::size_t proj_dim = 0;      // k, multi-dimensional affinity only

  /// Throws std::invalid_argument on non-positive sizes or missing k.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  bool regularized = true;  // weight matrices yes, biases no
};

/**
 * All trainable tensors of one model, in a fixed per-kind order.
 *
 * Names: "embedding"; "affinity.w"/"affinity.b" (siarn) or
 * "affinity.w_q"/"b_q"/"w_p"/"b_p" (miarn); "lstm.w_{i,f,o,g}" with
 * matching "lstm.b_*"; "fusion.w_z"/"b_z"/"w_f"/"b_f"; "attention.w"/"b"/"u"
 * (attlstm); "output.w"/"output.b" for the baselines. Matrices act on row
 * vectors, so a layer mapping m -> p stores an m x p weight.
 */
template <typename T>
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelConfig config) : config_(config) {}

  [[nodiscard]] const ModelConfig& config() const { return config_; }

  void add(std::string name, Tensor<T> value, bool regularized);
  [[nodiscard]] bool has(std::string_view name) const;
  Tensor<T>& get(std::string_view name);
  [[nodiscard]] const Tensor<T>& get(std::string_view name) const;

  std::vector<Param<T>>& entries() { return params_; }
  [[nodiscard]] const std::vector<Param<T>>& entries() const { return params_; }

  /// Handles aliasing the stored tensors, in order.
  [[nodiscard]] std::vector<Tensor<T>> tensors() const;
  [[nodiscard]] std::size_t parameter_count() const;

  void set_requires_grad(bool flag);
  void zero_grad();

  [[nodiscard]] ModelParams clone() const;

  template <typename U>
  [[nodiscard]] ModelParams<U> cast() const {
    ModelParams<U> out(config_);
    for (const auto& p : params_) {
      std::vector<U> values(p.value.data().begin(), p.value.data().end());
      out.add(p.name, Tensor<U>(p.value.shape(), std::move(values)), p.regularized);
    }
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<Param<T>> params_;
};

/// Weights ~ U(+-1/sqrt(fan_in)); biases 0 except the LSTM forget gate (1).
/// When `embedding` is given it is used as-is, otherwise rows are drawn from
/// U(-0.05, 0.05) with a zero PAD row.
ModelParams<float> init_params(const ModelConfig& config, Rng& init,
                               std::optional<Tensor<float>> embedding = std::nullopt);

// Typed views; the tensors alias the ones held by ModelParams.

template <typename T>
struct SingleAffinityParams {
  Tensor<T> w;  // 2n x 1
  Tensor<T> b;  // [1]
};

template <typename T>
struct MultiAffinityParams {
  Tensor<T> w_q;  // 2n x k
  Tensor<T> b_q;  // [k]
  Tensor<T> w_p;  // k x 1
  Tensor<T> b_p;  // [1]
};

template <typename T>
struct LstmParams {
  // Each w_* is (n + d) x d applied to [x_t; h_{t-1}].
  Tensor<T> w_i, b_i;  // input gate
  Tensor<T> w_f, b_f;  // forget gate
  Tensor<T> w_o, b_o;  // output gate
  Tensor<T> w_g, b_g;  // candidate
};

template <typename T>
struct FusionParams {
  Tensor<T> w_z;  // (n + d) x d
  Tensor<T> b_z;  // [d]
  Tensor<T> w_f;  // d x 2
  Tensor<T> b_f;  // [2]
};

template <typename T>
struct AttentionPoolParams {
  Tensor<T> w;  // d x d
  Tensor<T> b;  // [d]
  Tensor<T> u;  // d x 1
};

template <typename T>
struct OutputParams {
  Tensor<T> w;  // m x 2
  Tensor<T> b;  // [2]
};

template <typename T>
SingleAffinityParams<T> single_affinity(const ModelParams<T>& p) {
  return {p.get("affinity.w"), p.get("affinity.b")};
}

template <typename T>
MultiAffinityParams<T> multi_affinity(const ModelParams<T>& p) {
  return {p.get("affinity.w_q"), p.get("affinity.b_q"), p.get("affinity.w_p"),
          p.get("affinity.b_p")};
}

template <typename T>
LstmParams<T> lstm(const ModelParams<T>& p) {
  return {p.get("lstm.w_i"), p.get("lstm.b_i"), p.get("lstm.w_f"), p.get("lstm.b_f"),
          p.get("lstm.w_o"), p.get("lstm.b_o"), p.get("lstm.w_g"), p.get("lstm.b_g")};
}

template <typename T>
FusionParams<T> fusion(const ModelParams<T>& p) {
  return {p.get("fusion.w_z"), p.get("fusion.b_z"), p.get("fusion.w_f"), p.get("fusion.b_f")};
}

template <typename T>
AttentionPoolParams<T> attention_pool(const ModelParams<T>& p) {
  return {p.get("attention.w"), p.get("attention.b"), p.get("attention.u")};
}

template <typename T>
OutputParams<T> output(const ModelParams<T>& p) {
  return {p.get("output.w"), p.get("output.b")};
}

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace miarn::model
