#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace proxyseg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array with an optional gradient buffer.
///
/// A tensor is a shared handle: copies alias the same storage, which is what
/// the tape needs to route gradients back to the tensors that produced them.
/// Use `clone()` for an independent copy. Image data is laid out
/// (batch, channel, height, width).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from_data(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(storage_); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept;

  std::span<T> data();
  std::span<const T> data() const;

  bool requires_grad() const noexcept;
  // Enabling allocates a zero gradient buffer; disabling releases it.
  void set_requires_grad(bool value);
  bool has_grad() const noexcept;
  // Handles share storage, so the gradient stays writable through const copies.
  std::span<T> grad() const;
  void zero_grad();

  T item() const;
  BasicTensor clone() const;
  // Copy of the values without gradient tracking.
  BasicTensor detach() const;
  bool same_storage(const BasicTensor& other) const noexcept { return storage_ == other.storage_; }

 private:
  struct Storage {
    std::vector<T> values;
    std::vector<T> gradient;
    bool requires_grad = false;
  };

  BasicTensor(Shape shape, std::shared_ptr<Storage> storage)
      : shape_(std::move(shape)), storage_(std::move(storage)) {}

  Shape shape_;
  std::shared_ptr<Storage> storage_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Ordered record of backward rules for one forward pass.
///
/// An inference-mode tape records nothing. `backward` replays the rules in
/// reverse recording order exactly once; the tape is consumed afterwards.
template <typename T>
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record && !consumed_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return rules_.size(); }

  void record(std::function<void()> rule);
  void backward(BasicTensor<T>& loss);

 private:
  std::vector<std::function<void()>> rules_;
  Mode mode_;
  bool consumed_ = false;
};

template <typename T>
void backward(BasicTensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

}  // namespace proxyseg
