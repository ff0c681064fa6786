#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "proxyseg/label_map.hpp"
#include "proxyseg/tensor.hpp"

namespace proxyseg {

struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t base_width = 16;
  std::size_t num_classes = 6;
  std::uint64_t seed = 0;

  // Throws ConfigError unless base_width is a positive multiple of 4 and
  // there are at least two classes.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class SimilarityMode { dot, cosine };

// Decoder diversity penalty on the flattened decoder weight vectors.
struct PenaltyOptions {
  double beta = 0.01;
  SimilarityMode mode = SimilarityMode::dot;
  bool include_biases = false;
};

template <typename T>
struct ConvLayer {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// Pyramid-pooling-lite head: 2x2 and 1x1 pooled context, each reduced to
// base_width/2 channels, concatenated onto the encoder features and
// classified by a 1x1 convolution.
template <typename T>
struct DecoderBranch {
  ConvLayer<T> reduce_pool2;
  ConvLayer<T> reduce_pool1;
  ConvLayer<T> classifier;
};

/// Shared encoder with two decoder branches of identical architecture.
///
/// Copies are deep: a copied network owns independent parameter and
/// velocity tensors.
template <typename T>
class BasicSegNet {
 public:
  static constexpr std::size_t kEncoderLayers = 4;
  static constexpr std::size_t kBranches = 2;

  // Encoder weights are drawn from `seed`, branch b from `seed ^ (b + 1)`,
  // He-normal with std sqrt(2 / fan_in); biases start at zero.
  explicit BasicSegNet(const ModelConfig& config);

  BasicSegNet(const BasicSegNet& other);
  BasicSegNet& operator=(const BasicSegNet& other);
  BasicSegNet(BasicSegNet&&) noexcept = default;
  BasicSegNet& operator=(BasicSegNet&&) noexcept = default;

  const ModelConfig& config() const noexcept { return config_; }

  std::array<ConvLayer<T>, kEncoderLayers>& encoder() noexcept { return encoder_; }
  const std::array<ConvLayer<T>, kEncoderLayers>& encoder() const noexcept { return encoder_; }
  DecoderBranch<T>& branch(std::size_t b) { return branches_.at(b); }
  const DecoderBranch<T>& branch(std::size_t b) const { return branches_.at(b); }

  // Handles in fixed order: encoder layers, then branch 0, then branch 1;
  // weight before bias within a layer.
  std::vector<BasicTensor<T>> parameters() const;
  std::vector<std::string> parameter_names() const;
  // Number of leading entries of parameters() that belong to the encoder.
  std::size_t encoder_tensor_count() const noexcept { return 2 * kEncoderLayers; }

  // Momentum buffers aligned with parameters().
  std::vector<BasicTensor<T>>& velocity() noexcept { return velocity_; }
  const std::vector<BasicTensor<T>>& velocity() const noexcept { return velocity_; }

  std::size_t encoder_parameter_count() const;
  std::size_t branch_parameter_count(std::size_t b) const;

  // Overwrites branch `to` with a copy of branch `from`.
  void copy_branch(std::size_t from, std::size_t to);

 private:
  void deep_copy_from(const BasicSegNet& other);

  ModelConfig config_;
  std::array<ConvLayer<T>, kEncoderLayers> encoder_;
  std::array<DecoderBranch<T>, kBranches> branches_;
  std::vector<BasicTensor<T>> velocity_;
};

using SegNet = BasicSegNet<float>;
using SegNet64 = BasicSegNet<double>;

template <typename T>
struct BranchLogits {
  BasicTensor<T> logits1;
  BasicTensor<T> logits2;
  // (logits1 + logits2) / 2, before any softmax.
  BasicTensor<T> logits_avg;
};

/// Full-resolution logits of both branches for images (N,C,H,W). H and W
/// must be multiples of 4: the encoder halves them once and the 2x2 pooled
/// context is upsampled back by an integer factor.
template <typename T>
BranchLogits<T> forward(Tape<T>& tape, const BasicSegNet<T>& model, const BasicTensor<T>& images);

/// Convolution tensors of one branch in architectural order.
template <typename T>
std::vector<BasicTensor<T>> decoder_weight_tensors(const DecoderBranch<T>& branch, bool include_biases = false);

/// Row-major flattening of each branch's convolution weights; equal lengths.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> flatten_decoder_weights(const BasicSegNet<T>& model,
                                                                  bool include_biases = false);

/// beta * w1.w2 (dot) or beta * w1.w2 / (|w1||w2| + 1e-8) (cosine).
template <typename T>
BasicTensor<T> similarity_penalty(Tape<T>& tape, const BasicTensor<T>& w1, const BasicTensor<T>& w2, T beta,
                                  SimilarityMode mode);

// Penalty over the model's two flattened decoders.
template <typename T>
BasicTensor<T> similarity_penalty(Tape<T>& tape, const BasicSegNet<T>& model, const PenaltyOptions& options);

/// Cosine similarity of the flattened decoder weights (inspection only).
template <typename T>
double decoder_cosine(const BasicSegNet<T>& model, bool include_biases = false);

/// Index of the largest logit per pixel; ties go to the lowest class.
template <typename T>
LabelMap argmax_labels(const BasicTensor<T>& logits);

/// True where both branches' argmax agree.
template <typename T>
PixelMask agreement_map(const BasicTensor<T>& logits1, const BasicTensor<T>& logits2);

/// Sum of the two branches' masked weighted cross-entropies plus the
/// decoder similarity penalty, given an already recorded forward pass.
template <typename T>
BasicTensor<T> joint_loss(Tape<T>& tape, const BasicSegNet<T>& model, const BranchLogits<T>& logits,
                          const LabelMap& labels, const PixelMask& mask_b1, const PixelMask& mask_b2,
                          const BasicTensor<T>& class_weights, const PenaltyOptions& penalty);

template <typename T>
BasicTensor<T> joint_loss(Tape<T>& tape, const BasicSegNet<T>& model, const BasicTensor<T>& images,
                          const LabelMap& labels, const PixelMask& mask_b1, const PixelMask& mask_b2,
                          const BasicTensor<T>& class_weights, const PenaltyOptions& penalty);

}  // namespace proxyseg
