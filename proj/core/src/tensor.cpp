#include "miarn/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace miarn::num {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T>::Tensor() : Tensor(Shape{0}) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<T>(numel(shape), T(0)), requires_grad) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : store_(std::make_shared<Storage>()) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  store_->shape = std::move(shape);
  store_->data = std::move(data);
  set_requires_grad(requires_grad);
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape()));
  }
  return store_->shape[axis];
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + to_string(shape()));
  return store_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  return rank() == 2 ? store_->shape[1] : size();
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) {
    throw ContractError("item() on non-scalar tensor " + to_string(shape()));
  }
  return store_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  store_->requires_grad = flag;
  if (flag && store_->grad.size() != store_->data.size()) {
    store_->grad.assign(store_->data.size(), T(0));
  } else if (!flag) {
    store_->grad.clear();
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(store_->grad.begin(), store_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(store_->shape, store_->data, store_->requires_grad);
  if (store_->requires_grad) out.store_->grad = store_->grad;
  return out;
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    tape_.clear();
    return;
  }
  loss.grad()[0] += T(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  tape_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace miarn::num
