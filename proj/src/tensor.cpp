#include "proxyseg/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "proxyseg/errors.hpp"

namespace proxyseg {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> values(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_data(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto storage = std::make_shared<Storage>();
  storage->values = std::move(values);
  BasicTensor t(std::move(shape), std::move(storage));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::numel() const noexcept {
  return storage_ ? storage_->values.size() : 0;
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  if (!storage_) return {};
  return storage_->values;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  if (!storage_) return {};
  return storage_->values;
}

template <typename T>
bool BasicTensor<T>::requires_grad() const noexcept {
  return storage_ && storage_->requires_grad;
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool value) {
  if (!storage_) throw Error("set_requires_grad on an undefined tensor");
  storage_->requires_grad = value;
  if (value) {
    storage_->gradient.assign(storage_->values.size(), T(0));
  } else {
    storage_->gradient.clear();
    storage_->gradient.shrink_to_fit();
  }
}

template <typename T>
bool BasicTensor<T>::has_grad() const noexcept {
  return storage_ && storage_->requires_grad && storage_->gradient.size() == storage_->values.size();
}

template <typename T>
std::span<T> BasicTensor<T>::grad() const {
  if (!has_grad()) throw Error("tensor has no gradient buffer");
  return storage_->gradient;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (has_grad()) std::fill(storage_->gradient.begin(), storage_->gradient.end(), T(0));
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape_));
  return storage_->values[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  if (!storage_) return {};
  auto storage = std::make_shared<Storage>(*storage_);
  return BasicTensor(shape_, std::move(storage));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  if (!storage_) return {};
  return from_data(shape_, storage_->values, false);
}

template <typename T>
void Tape<T>::record(std::function<void()> rule) {
  if (consumed_) throw TapeError("cannot record on a consumed tape");
  if (mode_ == Mode::inference) return;
  rules_.push_back(std::move(rule));
}

template <typename T>
void Tape<T>::backward(BasicTensor<T>& loss) {
  if (consumed_) throw TapeError("backward called twice on the same tape; record a new forward pass");
  if (mode_ == Mode::inference) throw TapeError("backward on an inference-mode tape");
  if (loss.numel() != 1) throw ShapeError("backward requires a scalar loss, got " + shape_to_string(loss.shape()));
  consumed_ = true;
  if (!loss.requires_grad()) {
    rules_.clear();
    return;
  }
  loss.grad()[0] += T(1);
  for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
  rules_.clear();
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace proxyseg
