#include "miarn/params.hpp"

#include <cmath>
#include <stdexcept>

#include "miarn/corpus.hpp"
#include "miarn/embeddings.hpp"

namespace miarn::model {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::siarn:
      return "siarn";
    case ModelKind::miarn:
      return "miarn";
    case ModelKind::nbow:
      return "nbow";
    case ModelKind::lstm:
      return "lstm";
    case ModelKind::attlstm:
      return "attlstm";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::siarn, ModelKind::miarn, ModelKind::nbow, ModelKind::lstm,
                 ModelKind::attlstm}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

bool has_intra_attention(ModelKind kind) {
  return kind == ModelKind::siarn || kind == ModelKind::miarn;
}

bool has_attention(ModelKind kind) {
  return has_intra_attention(kind) || kind == ModelKind::attlstm;
}

bool has_lstm(ModelKind kind) { return kind != ModelKind::nbow; }

void ModelConfig::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must include PAD and UNK");
  if (embed_dim == 0) throw std::invalid_argument("embedding size n must be positive");
  if (has_lstm(kind) && hidden_dim == 0) {
    throw std::invalid_argument("hidden size d must be positive");
  }
  if (kind == ModelKind::miarn && proj_dim == 0) {
    throw std::invalid_argument("miarn needs a positive affinity projection size k");
  }
}

template <typename T>
void ModelParams<T>::add(std::string name, Tensor<T> value, bool regularized) {
  if (has(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  params_.push_back(Param<T>{std::move(name), std::move(value), regularized});
}

template <typename T>
bool ModelParams<T>::has(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

template <typename T>
Tensor<T>& ModelParams<T>::get(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T>
const Tensor<T>& ModelParams<T>::get(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool flag) {
  for (auto& p : params_) p.value.set_requires_grad(flag);
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams out(config_);
  for (const auto& p : params_) out.add(p.name, p.value.clone(), p.regularized);
  return out;
}

template class ModelParams<float>;
template class ModelParams<double>;

namespace {

Tensor<float> uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<float> w({fan_in, fan_out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& x : w.data()) x = static_cast<float>(rng.uniform(-bound, bound));
  return w;
}

Tensor<float> filled(std::size_t n, float value) {
  return Tensor<float>({n}, std::vector<float>(n, value));
}

}  // namespace

ModelParams<float> init_params(const ModelConfig& config, Rng& init,
                               std::optional<Tensor<float>> embedding) {
  config.validate();
  const std::size_t n = config.embed_dim, d = config.hidden_dim, k = config.proj_dim;
  ModelParams<float> p(config);

  if (embedding) {
    if (embedding->shape() != num::Shape{config.vocab_size, n}) {
      throw num::ShapeError("embedding matrix " + num::to_string(embedding->shape()) +
                            " does not match vocab_size x n = " +
                            num::to_string({config.vocab_size, n}));
    }
    p.add("embedding", *embedding, true);
  } else {
    p.add("embedding", corpus::random_embeddings(config.vocab_size, n, init), true);
  }

  switch (config.kind) {
    case ModelKind::siarn:
      p.add("affinity.w", uniform_weight(2 * n, 1, init), true);
      p.add("affinity.b", filled(1, 0.0f), false);
      break;
    case ModelKind::miarn:
      p.add("affinity.w_q", uniform_weight(2 * n, k, init), true);
      p.add("affinity.b_q", filled(k, 0.0f), false);
      p.add("affinity.w_p", uniform_weight(k, 1, init), true);
      p.add("affinity.b_p", filled(1, 0.0f), false);
      break;
    default:
      break;
  }

  if (has_lstm(config.kind)) {
    for (const char gate : {'i', 'f', 'o', 'g'}) {
      p.add(std::string("lstm.w_") + gate, uniform_weight(n + d, d, init), true);
      p.add(std::string("lstm.b_") + gate, filled(d, gate == 'f' ? 1.0f : 0.0f), false);
    }
  }

  switch (config.kind) {
    case ModelKind::siarn:
    case ModelKind::miarn:
      p.add("fusion.w_z", uniform_weight(n + d, d, init), true);
      p.add("fusion.b_z", filled(d, 0.0f), false);
      p.add("fusion.w_f", uniform_weight(d, 2, init), true);
      p.add("fusion.b_f", filled(2, 0.0f), false);
      break;
    case ModelKind::attlstm:
      p.add("attention.w", uniform_weight(d, d, init), true);
      p.add("attention.b", filled(d, 0.0f), false);
      p.add("attention.u", uniform_weight(d, 1, init), true);
      p.add("output.w", uniform_weight(d, 2, init), true);
      p.add("output.b", filled(2, 0.0f), false);
      break;
    case ModelKind::lstm:
      p.add("output.w", uniform_weight(d, 2, init), true);
      p.add("output.b", filled(2, 0.0f), false);
      break;
    case ModelKind::nbow:
      p.add("output.w", uniform_weight(n, 2, init), true);
      p.add("output.b", filled(2, 0.0f), false);
      break;
  }
  return p;
}

}  // namespace miarn::model
