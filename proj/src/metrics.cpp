#include "proxyseg/metrics.hpp"

#include <string>

namespace proxyseg {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::update(const LabelMap& predictions, const LabelMap& truth) {
  if (!predictions.same_geometry(truth)) throw ShapeError("confusion matrix: prediction and truth shapes differ");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions.values[i] >= k_) {
      throw Error("confusion matrix: prediction " + std::to_string(predictions.values[i]) + " not below K=" +
                  std::to_string(k_));
    }
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto y = truth.values[i];
    if (y == kIgnoreLabel) continue;
    if (y >= k_) throw Error("confusion matrix: truth label " + std::to_string(y) + " not below K");
    ++counts_[y * k_ + predictions.values[i]];
    ++total_;
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("confusion matrix: cannot merge different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

std::optional<double> ConfusionMatrix::iou(std::size_t k) const {
  if (k >= k_) throw Error("confusion matrix: class " + std::to_string(k) + " out of range");
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  for (std::size_t j = 0; j < k_; ++j) {
    row += counts_[k * k_ + j];
    col += counts_[j * k_ + k];
  }
  const std::uint64_t inter = counts_[k * k_ + k];
  const std::uint64_t uni = row + col - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::optional<double>> ConfusionMatrix::per_class_iou() const {
  std::vector<std::optional<double>> out;
  for (std::size_t k = 0; k < k_; ++k) out.push_back(iou(k));
  return out;
}

double ConfusionMatrix::mean_iou(AbsentClassPolicy policy) const {
  if (total_ == 0) throw EmptyMatrixError("mean IoU of an empty confusion matrix");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < k_; ++k) {
    const auto v = iou(k);
    if (v) {
      sum += *v;
      ++n;
    } else if (policy == AbsentClassPolicy::as_zero) {
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

double ConfusionMatrix::pixel_accuracy() const {
  if (total_ == 0) throw EmptyMatrixError("pixel accuracy of an empty confusion matrix");
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < k_; ++k) trace += counts_[k * k_ + k];
  return static_cast<double>(trace) / static_cast<double>(total_);
}

}  // namespace proxyseg
