#include "miarn/model.hpp"

#include <stdexcept>

namespace miarn::model {
namespace {

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

template <typename T>
Affinity<T> finish_affinity(Graph<T>& g, const Tensor<T>& pair_scores, std::size_t ell,
                            std::size_t valid_len) {
  return {num::reshape(g, pair_scores, {ell, ell}), affinity_mask(ell, valid_len), valid_len};
}

void check_valid_len(std::size_t valid_len, std::size_t max_len) {
  if (valid_len == 0 || valid_len > max_len) {
    throw std::invalid_argument("valid_len " + std::to_string(valid_len) +
                                " must be in [1, " + std::to_string(max_len) + "]");
  }
}

template <typename T>
void require_kind(const ModelParams<T>& params, ModelKind kind) {
  if (params.config().kind != kind) {
    throw std::invalid_argument(std::string("parameters belong to ") +
                                to_string(params.config().kind) + ", not " + to_string(kind));
  }
}

}  // namespace

Mask affinity_mask(std::size_t max_len, std::size_t valid_len) {
  Mask mask(max_len * max_len, 0);
  for (std::size_t i = 0; i < valid_len && i < max_len; ++i)
    for (std::size_t j = 0; j < valid_len && j < max_len; ++j)
      if (i != j) mask[i * max_len + j] = 1;
  return mask;
}

template <typename T>
Tensor<T> embed(Graph<T>& g, const Tensor<T>& embedding, std::span<const std::int32_t> ids) {
  return num::gather_rows(g, embedding, ids, corpus::Vocabulary::kPad);
}

template <typename T>
Affinity<T> affinity_single(Graph<T>& g, const Tensor<T>& words,
                            const SingleAffinityParams<T>& p, std::size_t valid_len) {
  const std::size_t ell = words.rows(), n = words.cols();
  check_valid_len(valid_len, ell);
  if (p.w.shape() != num::Shape{2 * n, 1}) {
    throw num::ShapeError("affinity_single: W_a must be " + num::to_string({2 * n, 1}) +
                          ", got " + num::to_string(p.w.shape()));
  }
  // W_a [w_i; w_j] = w_i . W_a[:n] + w_j . W_a[n:]
  auto left = num::matmul(g, words, num::slice_rows(g, p.w, 0, n));
  auto right = num::matmul(g, words, num::slice_rows(g, p.w, n, 2 * n));
  auto pairs = num::pair_combine(g, left, right, valid_len);
  return finish_affinity(g, num::add_bias(g, pairs, p.b), ell, valid_len);
}

template <typename T>
Affinity<T> affinity_multi(Graph<T>& g, const Tensor<T>& words, const MultiAffinityParams<T>& p,
                           std::size_t valid_len) {
  const std::size_t ell = words.rows(), n = words.cols();
  check_valid_len(valid_len, ell);
  if (p.w_q.rank() != 2 || p.w_q.dim(0) != 2 * n) {
    throw num::ShapeError("affinity_multi: W_q must have " + std::to_string(2 * n) +
                          " rows, got " + num::to_string(p.w_q.shape()));
  }
  auto left = num::matmul(g, words, num::slice_rows(g, p.w_q, 0, n));
  auto right = num::matmul(g, words, num::slice_rows(g, p.w_q, n, 2 * n));
  auto pairs = num::pair_combine(g, left, right, valid_len);
  auto hidden = num::relu(g, num::add_bias(g, pairs, p.b_q));
  auto scores = num::add_bias(g, num::matmul(g, hidden, p.w_p), p.b_p);
  return finish_affinity(g, scores, ell, valid_len);
}

template <typename T>
Tensor<T> intra_attention(Graph<T>& g, const Affinity<T>& s) {
  const std::size_t ell = s.scores.rows();
  auto pooled = num::masked_row_max(g, s.scores, s.mask);
  Mask tokens(ell, 0);
  for (std::size_t i = 0; i < s.valid_len && i < ell; ++i) tokens[i] = 1;
  return num::masked_softmax(g, pooled.values, pooled.row_valid, tokens);
}

template <typename T>
Tensor<T> attentive_rep(Graph<T>& g, const Tensor<T>& words, const Tensor<T>& attention) {
  return num::matmul(g, num::reshape(g, attention, {1, attention.size()}), words);
}

template <typename T>
std::vector<Tensor<T>> lstm_states(Graph<T>& g, const Tensor<T>& words, const LstmParams<T>& p,
                                   std::size_t valid_len) {
  check_valid_len(valid_len, words.rows());
  const std::size_t d = p.b_i.size();
  Tensor<T> h({1, d});
  Tensor<T> c({1, d});
  std::vector<Tensor<T>> states;
  states.reserve(valid_len);
  auto gate = [&g](const Tensor<T>& z, const Tensor<T>& w, const Tensor<T>& b) {
    return num::add_bias(g, num::matmul(g, z, w), b);
  };
  for (std::size_t t = 0; t < valid_len; ++t) {
    auto z = num::concat(g, num::row(g, words, t), h);
    auto i = num::sigmoid(g, gate(z, p.w_i, p.b_i));
    auto f = num::sigmoid(g, gate(z, p.w_f, p.b_f));
    auto o = num::sigmoid(g, gate(z, p.w_o, p.b_o));
    auto cand = num::tanh(g, gate(z, p.w_g, p.b_g));
    c = num::add(g, num::mul(g, f, c), num::mul(g, i, cand));
    h = num::mul(g, o, num::tanh(g, c));
    states.push_back(h);
  }
  return states;
}

template <typename T>
Tensor<T> lstm_encode(Graph<T>& g, const Tensor<T>& words, const LstmParams<T>& p,
                      std::size_t valid_len) {
  return lstm_states(g, words, p, valid_len).back();
}

template <typename T>
Tensor<T> fuse_predict(Graph<T>& g, const Tensor<T>& v_a, const Tensor<T>& v_c,
                       const FusionParams<T>& p) {
  auto joint = num::relu(g, num::add_bias(g, num::matmul(g, num::concat(g, v_a, v_c), p.w_z),
                                          p.b_z));
  auto logits = num::add_bias(g, num::matmul(g, joint, p.w_f), p.b_f);
  return num::softmax(g, num::reshape(g, logits, {2}));
}

template <typename T>
Pooled<T> attend_states(Graph<T>& g, std::span<const Tensor<T>> states,
                        const AttentionPoolParams<T>& p) {
  const std::size_t steps = states.size();
  auto hs = num::stack_rows<T>(g, states);
  auto proj = num::tanh(g, num::add_bias(g, num::matmul(g, hs, p.w), p.b));
  auto scores = num::reshape(g, num::matmul(g, proj, p.u), {steps});
  auto a = num::softmax(g, scores);
  auto context = num::matmul(g, num::reshape(g, a, {1, steps}), hs);
  return {context, a};
}

template <typename T>
Tensor<T> classify(Graph<T>& g, const Tensor<T>& x, const OutputParams<T>& p) {
  auto logits = num::add_bias(g, num::matmul(g, x, p.w), p.b);
  return num::softmax(g, num::reshape(g, logits, {2}));
}

template <typename T>
DocResult<T> forward_doc(Graph<T>& g, const ModelParams<T>& params,
                         std::span<const std::int32_t> ids, std::size_t valid_len) {
  const std::size_t ell = ids.size();
  check_valid_len(valid_len, ell);
  const ModelKind kind = params.config().kind;
  auto words = embed(g, params.get("embedding"), ids);
  DocResult<T> res;

  switch (kind) {
    case ModelKind::siarn:
    case ModelKind::miarn: {
      auto s = kind == ModelKind::siarn
                   ? affinity_single(g, words, single_affinity(params), valid_len)
                   : affinity_multi(g, words, multi_affinity(params), valid_len);
      auto a = intra_attention(g, s);
      auto v_a = attentive_rep(g, words, a);
      auto v_c = lstm_encode(g, words, lstm(params), valid_len);
      res.probs = fuse_predict(g, v_a, v_c, fusion(params));
      res.v_a = v_a;
      res.v_c = v_c;
      res.attention = AttentionRecord{ell, valid_len, to_doubles(s.scores), s.mask,
                                      to_doubles(a), {}};
      break;
    }
    case ModelKind::nbow: {
      Tensor<T> pick({1, ell});
      for (std::size_t i = 0; i < valid_len; ++i) pick[i] = T(1);
      res.probs = classify(g, num::matmul(g, pick, words), output(params));
      break;
    }
    case ModelKind::lstm: {
      auto v_c = lstm_encode(g, words, lstm(params), valid_len);
      res.v_c = v_c;
      res.probs = classify(g, v_c, output(params));
      break;
    }
    case ModelKind::attlstm: {
      auto states = lstm_states(g, words, lstm(params), valid_len);
      auto pooled = attend_states<T>(g, states, attention_pool(params));
      res.probs = classify(g, pooled.context, output(params));
      std::vector<double> weights(ell, 0.0);
      for (std::size_t i = 0; i < valid_len; ++i) weights[i] = static_cast<double>(pooled.attention[i]);
      res.attention = AttentionRecord{ell, valid_len, {}, {}, std::move(weights), {}};
      break;
    }
  }
  return res;
}

template <typename T>
BatchResult<T> forward_batch(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch) {
  BatchResult<T> out;
  out.probs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto doc = forward_doc(g, params, batch.row(i), batch.valid_len[i]);
    out.probs.push_back(doc.probs);
    if (doc.attention) out.attention.push_back(std::move(*doc.attention));
  }
  return out;
}

template <typename T>
BatchResult<T> forward_siarn(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch) {
  require_kind(params, ModelKind::siarn);
  return forward_batch(g, params, batch);
}

template <typename T>
BatchResult<T> forward_miarn(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch) {
  require_kind(params, ModelKind::miarn);
  return forward_batch(g, params, batch);
}

template <typename T>
BatchResult<T> forward_nbow(Graph<T>& g, const ModelParams<T>& params,
                            const corpus::Batch& batch) {
  require_kind(params, ModelKind::nbow);
  return forward_batch(g, params, batch);
}

template <typename T>
BatchResult<T> forward_attlstm(Graph<T>& g, const ModelParams<T>& params,
                               const corpus::Batch& batch) {
  require_kind(params, ModelKind::attlstm);
  return forward_batch(g, params, batch);
}

template <typename T>
Tensor<T> loss(Graph<T>& g, std::span<const Tensor<T>> probs, std::span<const int> labels,
               T lambda, const ModelParams<T>& params) {
  std::vector<Tensor<T>> positive;
  positive.reserve(probs.size());
  for (const auto& p : probs) positive.push_back(num::select(g, p, 1));
  auto stacked = num::reshape(g, num::stack_rows<T>(g, positive), {probs.size()});
  auto total = num::binary_cross_entropy(g, stacked, labels, static_cast<T>(kProbClamp));
  if (lambda == T(0)) return total;
  for (const auto& p : params.entries()) {
    if (!p.regularized) continue;
    const std::size_t skip = p.name == "embedding" ? 1 : 0;
    total = num::add(g, total, num::scale(g, num::sum_squares(g, p.value, skip), lambda));
  }
  return total;
}

template <typename T>
Tensor<T> batch_loss(Graph<T>& g, const ModelParams<T>& params, const corpus::Batch& batch,
                     T lambda) {
  auto res = forward_batch(g, params, batch);
  return loss<T>(g, res.probs, batch.labels, lambda, params);
}

#define MIARN_INSTANTIATE_MODEL(T)                                                          \
  template Tensor<T> embed(Graph<T>&, const Tensor<T>&, std::span<const std::int32_t>);     \
  template Affinity<T> affinity_single(Graph<T>&, const Tensor<T>&,                        \
                                       const SingleAffinityParams<T>&, std::size_t);       \
  template Affinity<T> affinity_multi(Graph<T>&, const Tensor<T>&,                         \
                                      const MultiAffinityParams<T>&, std::size_t);         \
  template Tensor<T> intra_attention(Graph<T>&, const Affinity<T>&);                        \
  template Tensor<T> attentive_rep(Graph<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template std::vector<Tensor<T>> lstm_states(Graph<T>&, const Tensor<T>&,                  \
                                              const LstmParams<T>&, std::size_t);           \
  template Tensor<T> lstm_encode(Graph<T>&, const Tensor<T>&, const LstmParams<T>&,         \
                                 std::size_t);                                              \
  template Tensor<T> fuse_predict(Graph<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                  const FusionParams<T>&);                                  \
  template Pooled<T> attend_states(Graph<T>&, std::span<const Tensor<T>>,                    \
                                   const AttentionPoolParams<T>&);                          \
  template Tensor<T> classify(Graph<T>&, const Tensor<T>&, const OutputParams<T>&);         \
  template DocResult<T> forward_doc(Graph<T>&, const ModelParams<T>&,                       \
                                    std::span<const std::int32_t>, std::size_t);            \
  template BatchResult<T> forward_batch(Graph<T>&, const ModelParams<T>&,                   \
                                        const corpus::Batch&);                              \
  template BatchResult<T> forward_siarn(Graph<T>&, const ModelParams<T>&,                   \
                                        const corpus::Batch&);                              \
  template BatchResult<T> forward_miarn(Graph<T>&, const ModelParams<T>&,                   \
                                        const corpus::Batch&);                              \
  template BatchResult<T> forward_nbow(Graph<T>&, const ModelParams<T>&,                    \
                                       const corpus::Batch&);                               \
  template BatchResult<T> forward_attlstm(Graph<T>&, const ModelParams<T>&,                 \
                                          const corpus::Batch&);                            \
  template Tensor<T> loss(Graph<T>&, std::span<const Tensor<T>>, std::span<const int>, T,   \
                          const ModelParams<T>&);                                           \
  template Tensor<T> batch_loss(Graph<T>&, const ModelParams<T>&, const corpus::Batch&, T);

MIARN_INSTANTIATE_MODEL(float)
MIARN_INSTANTIATE_MODEL(double)

#undef MIARN_INSTANTIATE_MODEL

}  // namespace miarn::model
