#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace miarn::num {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

/// Thrown when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a caller violates an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/**
 * Dense row-major tensor handle.
 *
 * Copies alias the same storage (like a shared pointer); use clone() for a
 * deep copy. When requires_grad is set a same-shape gradient buffer is kept
 * alongside the values and accumulated by Graph::backward.
 */
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  [[nodiscard]] const Shape& shape() const { return store_->shape; }
  [[nodiscard]] std::size_t rank() const { return store_->shape.size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const;
  [[nodiscard]] std::size_t size() const { return store_->data.size(); }
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  std::span<T> data() { return store_->data; }
  [[nodiscard]] std::span<const T> data() const { return store_->data; }
  /// Gradient buffer. Handles share storage, so this is writable through a
  /// const handle (backward closures hold const copies of their inputs).
  [[nodiscard]] std::span<T> grad() const { return store_->grad; }

  T& operator[](std::size_t i) { return store_->data[i]; }
  const T& operator[](std::size_t i) const { return store_->data[i]; }
  T& at(std::size_t r, std::size_t c) { return store_->data[r * cols() + c]; }
  [[nodiscard]] const T& at(std::size_t r, std::size_t c) const {
    return store_->data[r * cols() + c];
  }
  [[nodiscard]] T item() const;

  [[nodiscard]] bool requires_grad() const { return store_->requires_grad; }
  void set_requires_grad(bool flag);
  void zero_grad();

  [[nodiscard]] Tensor clone() const;
  [[nodiscard]] bool aliases(const Tensor& other) const {
    return store_ == other.store_;
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> store_;
};

/**
 * Tape of executed operations.
 *
 * Each differentiable op that produces a gradient-carrying output appends a
 * closure; backward() runs them in exact reverse order. A graph built with
 * recording disabled never stores closures and its outputs never require
 * gradients, which is how inference runs.
 */
template <typename T>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  [[nodiscard]] bool recording() const { return recording_; }
  [[nodiscard]] std::size_t size() const { return tape_.size(); }

  void record(std::function<void()> backward_fn) {
    tape_.push_back(std::move(backward_fn));
  }

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  /// reachable requires_grad tensor. The tape is consumed.
  void backward(const Tensor<T>& loss);

 private:
  bool recording_;
  std::vector<std::function<void()>> tape_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace miarn::num
