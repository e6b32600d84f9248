#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "miarn/corpus.hpp"
#include "miarn/ops.hpp"
#include "miarn/params.hpp"

namespace miarn::model {

using num::Graph;
using num::Mask;

inline constexpr double kProbClamp = 1e-7;

/// Word-pair affinity matrix over ell = max_len positions.
template <typename T>
struct Affinity {
  Tensor<T> scores;  // ell x ell; only cells with mask set are meaningful
  Mask mask;         // set for i != j with both i, j < valid_len
  std::size_t valid_len = 0;
};

/// Attention captured for one document, for export and inspection.
struct AttentionRecord {
  std::size_t max_len = 0;
  std::size_t valid_len = 0;
  std::vector<double> affinity;  // max_len x max_len; empty for attlstm
  Mask affinity_mask;
  std::vector<double> attention;  // max_len, zero on PAD
  std::vector<std::string> tokens;
};

Mask affinity_mask(std::size_t max_len, std::size_t valid_len);

/// Row i = E[ids[i]]; PAD rows are zero. Ids outside the table throw.
template <typename T>
Tensor<T> embed(Graph<T>& g, const Tensor<T>& embedding, std::span<const std::int32_t> ids);

/// s_ij = s_ji = W_a [w_i; w_j] + b_a for valid i < j.
template <typename T>
Affinity<T> affinity_single(Graph<T>& g, const Tensor<T>& words,
                            const SingleAffinityParams<T>& p, std::size_t valid_len);

/// s_ij = s_ji = W_p relu(W_q [w_i; w_j] + b_q) + b_p for valid i < j.
template <typename T>
Affinity<T> affinity_multi(Graph<T>& g, const Tensor<T>& words, const MultiAffinityParams<T>& p,
                           std::size_t valid_len);

/// a = softmax(row-wise max of s) over valid tokens; the diagonal is never
/// read. With a single valid token all weight goes to it.
template <typename T>
Tensor<T> intra_attention(Graph<T>& g, const Affinity<T>& s);

/// v_a = sum_i a_i w_i as [1 x n].
template <typename T>
Tensor<T> attentive_rep(Graph<T>& g, const Tensor<T>& words, const Tensor<T>& attention);

/// Hidden states h_1..h_valid_len, each [1 x d]. Steps past valid_len are
/// never executed.
template <typename T>
std::vector<Tensor<T>> lstm_states(Graph<T>& g, const Tensor<T>& words, const LstmParams<T>& p,
                                   std::size_t valid_len);

/// v_c = h_valid_len as [1 x d].
template <typename T>
Tensor<T> lstm_encode(Graph<T>& g, const Tensor<T>& words, const LstmParams<T>& p,
                      std::size_t valid_len);

/// softmax(W_f relu(W_z [v_a; v_c] + b_z) + b_f) as [2].
template <typename T>
Tensor<T> fuse_predict(Graph<T>& g, const Tensor<T>& v_a, const Tensor<T>& v_c,
                       const FusionParams<T>& p);

template <typename T>
struct Pooled {
  Tensor<T> context;    // [1 x d]
  Tensor<T> attention;  // [steps]
};

/// score_i = u . tanh(W h_i + b), a = softmax(score), context = sum_i a_i h_i.
template <typename T>
Pooled<T> attend_states(Graph<T>& g, std::span<const Tensor<T>> states,
                        const AttentionPoolParams<T>& p);

/// softmax(x W + b) as [2].
template <typename T>
Tensor<T> classify(Graph<T>& g, const Tensor<T>& x, const OutputParams<T>& p);

template <typename T>
struct DocResult {
  Tensor<T> probs;  // [2], index 1 is the positive class
  std::optional<Tensor<T>> v_a;
  std::optional<Tensor<T>> v_c;
  std::optional<AttentionRecord> attention;
};

/// Runs whichever model `params` describes on one encoded document.
template <typename T>
DocResult<T> forward_doc(Graph<T>& g, const ModelParams<T>& params,
                         std::span<const std::int32_t> ids, std::size_t valid_len);

template <typename T>
struct BatchResult {
  std::vector<Tensor<T>> probs;
  std::vector<AttentionRecord> attention;  // one per doc for attention models
};

template <typename T>
BatchResult<T> forward_batch(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch);

// Kind-checked entry points; each throws std::invalid_argument when params
// belong to a different model.
template <typename T>
BatchResult<T> forward_siarn(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch);
template <typename T>
BatchResult<T> forward_miarn(Graph<T>& g, const ModelParams<T>& params,
                             const corpus::Batch& batch);
template <typename T>
BatchResult<T> forward_nbow(Graph<T>& g, const ModelParams<T>& params,
                            const corpus::Batch& batch);
template <typename T>
BatchResult<T> forward_attlstm(Graph<T>& g, const ModelParams<T>& params,
                               const corpus::Batch& batch);

/**
 * J = -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] + lambda * R, where p_i
 * is the positive-class probability clamped to [1e-7, 1 - 1e-7] and R is
 * the sum of squares of every regularized weight, excluding biases and the
 * PAD embedding row.
 */
template <typename T>
Tensor<T> loss(Graph<T>& g, std::span<const Tensor<T>> probs, std::span<const int> labels,
               T lambda, const ModelParams<T>& params);

template <typename T>
Tensor<T> batch_loss(Graph<T>& g, const ModelParams<T>& params, const corpus::Batch& batch,
                     T lambda);

/// Class 1 only when its probability is strictly larger.
template <typename T>
int predict(const Tensor<T>& probs) {
  return probs[1] > probs[0] ? 1 : 0;
}

}  // namespace miarn::model
