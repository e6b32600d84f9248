#include "miarn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace miarn::num {
namespace {

template <typename T>
bool wants_grad(const Graph<T>& g, std::initializer_list<const Tensor<T>*> inputs) {
  if (!g.recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(Graph<T>& g, const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  Tensor<T> out(a.shape(), wants_grad(g, {&a}));
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  if (out.requires_grad()) {
    g.record([a, out, deriv]() mutable {
      auto ga = a.grad();
      auto go = out.grad();
      auto x = a.data();
      auto y = out.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * deriv(x[i], y[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n}, wants_grad(g, {&a, &b}));
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = A[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = &B[p * n];
      T* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  if (out.requires_grad()) {
    g.record([a, b, out, m, k, n]() mutable {
      auto G = out.grad();
      auto A = a.data();
      auto B = b.data();
      if (a.requires_grad()) {
        // dA = G * B^T
        auto GA = a.grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            T acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
            GA[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        // dB = A^T * G
        auto GB = b.grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const T aip = A[i * k + p];
            if (aip == T(0)) continue;
            for (std::size_t j = 0; j < n; ++j) GB[p * n + j] += aip * G[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ShapeError("concat: leading dimensions differ between " +
                     to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t p = a.shape().back(), q = b.shape().back();
  const std::size_t lead = p + q == 0 ? 0 : (a.size() + b.size()) / (p + q);
  Shape shape = a.shape();
  shape.back() = p + q;
  Tensor<T> out(shape, wants_grad(g, {&a, &b}));
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t r = 0; r < lead; ++r) {
    std::copy_n(A.begin() + r * p, p, C.begin() + r * (p + q));
    std::copy_n(B.begin() + r * q, q, C.begin() + r * (p + q) + p);
  }
  if (out.requires_grad()) {
    g.record([a, b, out, lead, p, q]() mutable {
      auto G = out.grad();
      for (std::size_t r = 0; r < lead; ++r) {
        if (a.requires_grad()) {
          auto GA = a.grad();
          for (std::size_t j = 0; j < p; ++j) GA[r * p + j] += G[r * (p + q) + j];
        }
        if (b.requires_grad()) {
          auto GB = b.grad();
          for (std::size_t j = 0; j < q; ++j) GB[r * q + j] += G[r * (p + q) + p + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out(a.shape(), wants_grad(g, {&a, &b}));
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] + B[i];
  if (out.requires_grad()) {
    g.record([a, b, out]() mutable {
      auto G = out.grad();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
      }
      if (b.requires_grad()) {
        auto GB = b.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.shape(), wants_grad(g, {&a, &b}));
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * B[i];
  if (out.requires_grad()) {
    g.record([a, b, out]() mutable {
      auto G = out.grad();
      auto A = a.data();
      auto B = b.data();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * B[i];
      }
      if (b.requires_grad()) {
        auto GB = b.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * A[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor) {
  return unary(
      g, a, [factor](T x) { return factor * x; },
      [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_bias(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& bias) {
  const std::size_t c = a.shape().empty() ? 0 : a.shape().back();
  if (bias.size() != c) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) +
                     " does not match last axis of " + to_string(a.shape()));
  }
  const std::size_t r = c == 0 ? 0 : a.size() / c;
  Tensor<T> out(a.shape(), wants_grad(g, {&a, &bias}));
  auto A = a.data();
  auto Bv = bias.data();
  auto C = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C[i * c + j] = A[i * c + j] + Bv[j];
  if (out.requires_grad()) {
    g.record([a, bias, out, r, c]() mutable {
      auto G = out.grad();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
      }
      if (bias.requires_grad()) {
        auto GB = bias.grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) GB[j] += G[i * c + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Graph<T>& g, const Tensor<T>& a) {
  return unary(
      g, a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& a) {
  return unary(
      g, a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(Graph<T>& g, const Tensor<T>& a) {
  return unary(
      g, a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& a) {
  Tensor<T> out({1}, wants_grad(g, {&a}));
  T acc = 0;
  for (T x : a.data()) acc += x;
  out[0] = acc;
  if (out.requires_grad()) {
    g.record([a, out]() mutable {
      const T go = out.grad()[0];
      for (T& ga : a.grad()) ga += go;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum_squares(Graph<T>& g, const Tensor<T>& a, std::size_t skip_rows) {
  const std::size_t c = a.cols();
  const std::size_t start = std::min(a.size(), skip_rows * c);
  Tensor<T> out({1}, wants_grad(g, {&a}));
  T acc = 0;
  auto A = a.data();
  for (std::size_t i = start; i < A.size(); ++i) acc += A[i] * A[i];
  out[0] = acc;
  if (out.requires_grad()) {
    g.record([a, out, start]() mutable {
      const T go = out.grad()[0];
      auto A = a.data();
      auto GA = a.grad();
      for (std::size_t i = start; i < A.size(); ++i) GA[i] += T(2) * A[i] * go;
    });
  }
  return out;
}

template <typename T>
RowMax<T> masked_row_max(Graph<T>& g, const Tensor<T>& s, const Mask& mask) {
  if (s.rank() != 2) {
    throw ShapeError("masked_row_max: expected a matrix, got " + to_string(s.shape()));
  }
  if (mask.size() != s.size()) {
    throw ShapeError("masked_row_max: mask has " + std::to_string(mask.size()) +
                     " entries for " + to_string(s.shape()));
  }
  const std::size_t r = s.dim(0), c = s.dim(1);
  RowMax<T> res{Tensor<T>({r}, wants_grad(g, {&s})), Mask(r, 0)};
  std::vector<std::size_t> argmax(r, 0);
  auto S = s.data();
  auto V = res.values.data();
  for (std::size_t i = 0; i < r; ++i) {
    bool found = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (!mask[i * c + j]) continue;
      // Strict comparison keeps the lowest index on ties.
      if (!found || S[i * c + j] > V[i]) {
        V[i] = S[i * c + j];
        argmax[i] = j;
        found = true;
      }
    }
    res.row_valid[i] = found ? 1 : 0;
  }
  if (res.values.requires_grad()) {
    Tensor<T> out = res.values;
    g.record([s, out, argmax = std::move(argmax), valid = res.row_valid, c]() mutable {
      auto G = out.grad();
      auto GS = s.grad();
      for (std::size_t i = 0; i < G.size(); ++i)
        if (valid[i]) GS[i * c + argmax[i]] += G[i];
    });
  }
  return res;
}

template <typename T>
Tensor<T> masked_softmax(Graph<T>& g, const Tensor<T>& v, const Mask& valid,
                         const Mask& fallback) {
  if (valid.size() != v.size()) {
    throw ShapeError("masked_softmax: mask has " + std::to_string(valid.size()) +
                     " entries for " + to_string(v.shape()));
  }
  const std::size_t n = v.size();
  auto X = v.data();
  T peak = -std::numeric_limits<T>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i]) {
      peak = std::max(peak, X[i]);
      any = true;
    }
  }
  if (!any) {
    if (fallback.size() != n) {
      throw ContractError("masked_softmax: no valid entries and no fallback positions");
    }
    const auto count = static_cast<std::size_t>(
        std::count_if(fallback.begin(), fallback.end(), [](auto f) { return f != 0; }));
    if (count == 0) {
      throw ContractError("masked_softmax: no valid entries and empty fallback");
    }
    Tensor<T> out(v.shape());
    for (std::size_t i = 0; i < n; ++i)
      out[i] = fallback[i] ? T(1) / static_cast<T>(count) : T(0);
    return out;
  }
  Tensor<T> out(v.shape(), wants_grad(g, {&v}));
  auto Y = out.data();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i]) {
      Y[i] = std::exp(X[i] - peak);
      total += Y[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) Y[i] = valid[i] ? Y[i] / total : T(0);
  if (out.requires_grad()) {
    g.record([v, out, valid]() mutable {
      auto G = out.grad();
      auto Y = out.data();
      auto GV = v.grad();
      T dot = 0;
      for (std::size_t i = 0; i < G.size(); ++i)
        if (valid[i]) dot += G[i] * Y[i];
      for (std::size_t i = 0; i < G.size(); ++i)
        if (valid[i]) GV[i] += Y[i] * (G[i] - dot);
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(Graph<T>& g, const Tensor<T>& v) {
  return masked_softmax(g, v, Mask(v.size(), 1));
}

template <typename T>
Tensor<T> gather_rows(Graph<T>& g, const Tensor<T>& table,
                      std::span<const std::int32_t> ids, std::int32_t skip_id) {
  const std::size_t vocab = table.rows(), c = table.cols();
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ShapeError("gather_rows: id " + std::to_string(id) +
                       " out of range for table " + to_string(table.shape()));
    }
  }
  Tensor<T> out({ids.size(), c}, wants_grad(g, {&table}));
  auto E = table.data();
  auto O = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == skip_id) continue;
    std::copy_n(E.begin() + static_cast<std::size_t>(ids[i]) * c, c, O.begin() + i * c);
  }
  if (out.requires_grad()) {
    g.record([table, out, ids = std::vector<std::int32_t>(ids.begin(), ids.end()),
              skip_id, c]() mutable {
      auto G = out.grad();
      auto GE = table.grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == skip_id) continue;
        const std::size_t base = static_cast<std::size_t>(ids[i]) * c;
        for (std::size_t j = 0; j < c; ++j) GE[base + j] += G[i * c + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> row(Graph<T>& g, const Tensor<T>& a, std::size_t r) {
  if (r >= a.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                     to_string(a.shape()));
  }
  const std::size_t c = a.cols();
  Tensor<T> out({1, c}, wants_grad(g, {&a}));
  std::copy_n(a.data().begin() + r * c, c, out.data().begin());
  if (out.requires_grad()) {
    g.record([a, out, r, c]() mutable {
      auto G = out.grad();
      auto GA = a.grad();
      for (std::size_t j = 0; j < c; ++j) GA[r * c + j] += G[j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_rows(Graph<T>& g, const Tensor<T>& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + to_string(a.shape()));
  }
  const std::size_t c = a.cols();
  Tensor<T> out({end - begin, c}, wants_grad(g, {&a}));
  std::copy(a.data().begin() + begin * c, a.data().begin() + end * c, out.data().begin());
  if (out.requires_grad()) {
    g.record([a, out, begin, c]() mutable {
      auto G = out.grad();
      auto GA = a.grad();
      for (std::size_t i = 0; i < G.size(); ++i) GA[begin * c + i] += G[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> stack_rows(Graph<T>& g, std::span<const Tensor<T>> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t c = rows.front().size();
  bool grad = false;
  for (const auto& r : rows) {
    if (r.size() != c) {
      throw ShapeError("stack_rows: row " + to_string(r.shape()) + " differs from " +
                       to_string(rows.front().shape()));
    }
    grad = grad || r.requires_grad();
  }
  Tensor<T> out({rows.size(), c}, g.recording() && grad);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(rows[i].data().begin(), c, out.data().begin() + i * c);
  if (out.requires_grad()) {
    g.record([rows = std::vector<Tensor<T>>(rows.begin(), rows.end()), out, c]() mutable {
      auto G = out.grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].requires_grad()) continue;
        auto GR = rows[i].grad();
        for (std::size_t j = 0; j < c; ++j) GR[j] += G[i * c + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " +
                     to_string(shape));
  }
  std::vector<T> values(a.data().begin(), a.data().end());
  Tensor<T> out(std::move(shape), std::move(values), wants_grad(g, {&a}));
  if (out.requires_grad()) {
    g.record([a, out]() mutable {
      auto G = out.grad();
      auto GA = a.grad();
      for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> select(Graph<T>& g, const Tensor<T>& a, std::size_t index) {
  if (index >= a.size()) {
    throw ShapeError("select: index " + std::to_string(index) + " out of range for " +
                     to_string(a.shape()));
  }
  Tensor<T> out({1}, {a[index]}, wants_grad(g, {&a}));
  if (out.requires_grad()) {
    g.record([a, out, index]() mutable { a.grad()[index] += out.grad()[0]; });
  }
  return out;
}

template <typename T>
Tensor<T> pair_combine(Graph<T>& g, const Tensor<T>& left, const Tensor<T>& right,
                       std::size_t valid_len) {
  if (left.rank() != 2 || left.shape() != right.shape()) {
    throw ShapeError("pair_combine: operands " + to_string(left.shape()) + " and " +
                     to_string(right.shape()) + " must be equal-shaped matrices");
  }
  const std::size_t ell = left.dim(0), k = left.dim(1);
  const std::size_t len = std::min(valid_len, ell);
  Tensor<T> out({ell * ell, k}, wants_grad(g, {&left, &right}));
  auto L = left.data();
  auto R = right.data();
  auto O = out.data();
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i + 1; j < len; ++j) {
      T* upper = &O[(i * ell + j) * k];
      T* lower = &O[(j * ell + i) * k];
      for (std::size_t c = 0; c < k; ++c) {
        upper[c] = L[i * k + c] + R[j * k + c];
        lower[c] = upper[c];
      }
    }
  }
  if (out.requires_grad()) {
    g.record([left, right, out, ell, k, len]() mutable {
      auto G = out.grad();
      const bool gl = left.requires_grad(), gr = right.requires_grad();
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = i + 1; j < len; ++j) {
          const T* gu = &G[(i * ell + j) * k];
          const T* gd = &G[(j * ell + i) * k];
          for (std::size_t c = 0; c < k; ++c) {
            const T total = gu[c] + gd[c];
            if (gl) left.grad()[i * k + c] += total;
            if (gr) right.grad()[j * k + c] += total;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> binary_cross_entropy(Graph<T>& g, const Tensor<T>& p,
                               std::span<const int> labels, T clamp) {
  if (labels.size() != p.size()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + to_string(p.shape()));
  }
  Tensor<T> out({1}, wants_grad(g, {&p}));
  auto P = p.data();
  T acc = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const T q = std::clamp(P[i], clamp, T(1) - clamp);
    acc -= labels[i] ? std::log(q) : std::log(T(1) - q);
  }
  out[0] = acc;
  if (out.requires_grad()) {
    g.record([p, out, labels = std::vector<int>(labels.begin(), labels.end()),
              clamp]() mutable {
      const T go = out.grad()[0];
      auto P = p.data();
      auto GP = p.grad();
      for (std::size_t i = 0; i < P.size(); ++i) {
        if (P[i] < clamp || P[i] > T(1) - clamp) continue;
        GP[i] += go * (labels[i] ? -T(1) / P[i] : T(1) / (T(1) - P[i]));
      }
    });
  }
  return out;
}

#define MIARN_INSTANTIATE_OPS(T)                                                      \
  template Tensor<T> matmul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> concat(Graph<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> add(Graph<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> scale(Graph<T>&, const Tensor<T>&, T);                           \
  template Tensor<T> add_bias(Graph<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> relu(Graph<T>&, const Tensor<T>&);                               \
  template Tensor<T> sigmoid(Graph<T>&, const Tensor<T>&);                            \
  template Tensor<T> tanh(Graph<T>&, const Tensor<T>&);                               \
  template Tensor<T> sum(Graph<T>&, const Tensor<T>&);                                \
  template Tensor<T> sum_squares(Graph<T>&, const Tensor<T>&, std::size_t);           \
  template RowMax<T> masked_row_max(Graph<T>&, const Tensor<T>&, const Mask&);        \
  template Tensor<T> masked_softmax(Graph<T>&, const Tensor<T>&, const Mask&,         \
                                    const Mask&);                                     \
  template Tensor<T> softmax(Graph<T>&, const Tensor<T>&);                            \
  template Tensor<T> gather_rows(Graph<T>&, const Tensor<T>&,                         \
                                 std::span<const std::int32_t>, std::int32_t);        \
  template Tensor<T> row(Graph<T>&, const Tensor<T>&, std::size_t);                   \
  template Tensor<T> slice_rows(Graph<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> stack_rows(Graph<T>&, std::span<const Tensor<T>>);               \
  template Tensor<T> reshape(Graph<T>&, const Tensor<T>&, Shape);                     \
  template Tensor<T> select(Graph<T>&, const Tensor<T>&, std::size_t);                \
  template Tensor<T> pair_combine(Graph<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                  std::size_t);                                       \
  template Tensor<T> binary_cross_entropy(Graph<T>&, const Tensor<T>&,                \
                                          std::span<const int>, T);

MIARN_INSTANTIATE_OPS(float)
MIARN_INSTANTIATE_OPS(double)

#undef MIARN_INSTANTIATE_OPS

}  // namespace miarn::num
