#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "proxyseg/errors.hpp"
#include "proxyseg/label_map.hpp"

namespace proxyseg {

// Raised when a metric is requested from a matrix with no counted pixels.
class EmptyMatrixError : public Error {
 public:
  using Error::Error;
};

enum class AbsentClassPolicy {
  exclude,  // classes with zero union do not enter the mean
  as_zero,  // classes with zero union count as IoU 0
};

/// K x K pixel counts; cell (i, j) counts ground truth i predicted as j.
/// Pixels whose ground truth is `kIgnoreLabel` are not counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * k_ + predicted); }
  std::uint64_t total() const noexcept { return total_; }

  void update(const LabelMap& predictions, const LabelMap& truth);
  void merge(const ConfusionMatrix& other);

  // nullopt when the class has zero union (absent from truth and prediction).
  std::optional<double> iou(std::size_t k) const;
  std::vector<std::optional<double>> per_class_iou() const;
  double mean_iou(AbsentClassPolicy policy = AbsentClassPolicy::exclude) const;
  double pixel_accuracy() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace proxyseg
