#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "miarn/tensor.hpp"

namespace miarn::num {

/// Row-major validity flags; nonzero marks a usable entry.
using Mask = std::vector<std::uint8_t>;

// All ops take the graph first. An output requires a gradient iff the graph
// is recording and at least one differentiable input requires one.

/// [m x k] * [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

/// Concatenation along the last axis; leading dimensions must agree.
template <typename T>
Tensor<T> concat(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor);

/// a[r x c] + bias[c] broadcast over rows.
template <typename T>
Tensor<T> add_bias(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& bias);

/// Subgradient at exactly zero is zero.
template <typename T>
Tensor<T> relu(Graph<T>& g, const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(Graph<T>& g, const Tensor<T>& a);

/// Sum of all entries -> [1].
template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& a);

/// Sum of squared entries, ignoring the first `skip_rows` rows -> [1].
template <typename T>
Tensor<T> sum_squares(Graph<T>& g, const Tensor<T>& a, std::size_t skip_rows = 0);

template <typename T>
struct RowMax {
  Tensor<T> values;  // [rows]; 0 where the row is fully masked
  Mask row_valid;    // 0 marks a fully masked row
};

/// Per-row maximum over entries whose mask is set. Gradient flows only to
/// the arg-max entry; ties go to the lowest column index.
template <typename T>
RowMax<T> masked_row_max(Graph<T>& g, const Tensor<T>& s, const Mask& mask);

/// Softmax over entries with valid[i] != 0; invalid entries are exactly 0.
/// When no entry is valid the result is uniform over `fallback` (which must
/// then be non-empty) and carries no gradient.
template <typename T>
Tensor<T> masked_softmax(Graph<T>& g, const Tensor<T>& v, const Mask& valid,
                         const Mask& fallback = {});

template <typename T>
Tensor<T> softmax(Graph<T>& g, const Tensor<T>& v);

/// Embedding lookup: row i = table[ids[i]]. Rows whose id equals `skip_id`
/// are zero and never receive gradient.
template <typename T>
Tensor<T> gather_rows(Graph<T>& g, const Tensor<T>& table,
                      std::span<const std::int32_t> ids, std::int32_t skip_id = -1);

/// Row r of a matrix as [1 x cols].
template <typename T>
Tensor<T> row(Graph<T>& g, const Tensor<T>& a, std::size_t r);

/// Rows [begin, end) of a matrix.
template <typename T>
Tensor<T> slice_rows(Graph<T>& g, const Tensor<T>& a, std::size_t begin, std::size_t end);

/// Stacks equally sized row vectors into [count x cols].
template <typename T>
Tensor<T> stack_rows(Graph<T>& g, std::span<const Tensor<T>> rows);

template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& a, Shape shape);

/// Entry `index` of a flattened tensor -> [1].
template <typename T>
Tensor<T> select(Graph<T>& g, const Tensor<T>& a, std::size_t index);

/**
 * Symmetric pair scores from per-position projections.
 *
 * For ell = left.rows(), returns [ell*ell x k] where, for distinct valid
 * positions i < j < valid_len, rows (i*ell + j) and (j*ell + i) both hold
 * left[i] + right[j]. Every other row (diagonal or touching a position at or
 * beyond valid_len) is zero and has no gradient path.
 */
template <typename T>
Tensor<T> pair_combine(Graph<T>& g, const Tensor<T>& left, const Tensor<T>& right,
                       std::size_t valid_len);

/// -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] with p clamped to
/// [clamp, 1 - clamp]. Gradient is zero where clamping is active.
template <typename T>
Tensor<T> binary_cross_entropy(Graph<T>& g, const Tensor<T>& p,
                               std::span<const int> labels, T clamp);

}  // namespace miarn::num
