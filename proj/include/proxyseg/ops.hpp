#pragma once

#include <cstddef>
#include <span>

#include "proxyseg/label_map.hpp"
#include "proxyseg/tensor.hpp"

namespace proxyseg {

// Differentiable operations. Every op takes the tape it records its backward
// rule on; with an inference-mode tape nothing is recorded and outputs carry
// no gradient. Forward outputs are checked for non-finite values
// (NumericError).

enum class UpsampleMode { nearest, bilinear };

/// Cross-correlation of input (N,C,H,W) with weight (F,C,k,k), k in {1,3},
/// zero padding, plus a per-filter bias. Output (N,F,H',W') with
/// H' = (H + 2*padding - k) / stride + 1.
template <typename T>
BasicTensor<T> conv2d(Tape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride, std::size_t padding);

// Gradient at exactly zero is zero.
template <typename T>
BasicTensor<T> relu(Tape<T>& tape, const BasicTensor<T>& input);

/// Output cell (i, j) averages rows [floor(i*H/out_h), ceil((i+1)*H/out_h))
/// and the analogous column range.
template <typename T>
BasicTensor<T> adaptive_avg_pool(Tape<T>& tape, const BasicTensor<T>& input, std::size_t out_h, std::size_t out_w);

/// Integer-factor upsampling. Bilinear samples at half-pixel centres,
/// s = (d + 0.5) / factor - 0.5, clamped to the input extent.
template <typename T>
BasicTensor<T> upsample(Tape<T>& tape, const BasicTensor<T>& input, std::size_t factor_h, std::size_t factor_w,
                        UpsampleMode mode);

template <typename T>
BasicTensor<T> upsample(Tape<T>& tape, const BasicTensor<T>& input, std::size_t factor, UpsampleMode mode) {
  return upsample(tape, input, factor, factor, mode);
}

template <typename T>
BasicTensor<T> concat_channels(Tape<T>& tape, std::span<const BasicTensor<T>> inputs);

template <typename T>
BasicTensor<T> add(Tape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(Tape<T>& tape, const BasicTensor<T>& input, T factor);

/// Concatenation of the row-major flattenings of `inputs` into one vector.
template <typename T>
BasicTensor<T> flatten_concat(Tape<T>& tape, std::span<const BasicTensor<T>> inputs);

/// Inner product of two equally sized tensors, as a scalar.
template <typename T>
BasicTensor<T> dot(Tape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Class-weighted softmax cross-entropy over retained pixels, normalised by
/// the sum of the retained pixels' class weights:
///
///   loss = sum_p w[y_p] * -log softmax(logits_p)[y_p] / sum_p w[y_p]
///
/// A pixel is retained when its mask entry is set and its label is not
/// `kIgnoreLabel`. Returns 0 when nothing is retained. Labels must be below K
/// or equal to `kIgnoreLabel`.
template <typename T>
BasicTensor<T> masked_weighted_cross_entropy(Tape<T>& tape, const BasicTensor<T>& logits, const LabelMap& labels,
                                             const PixelMask& mask, const BasicTensor<T>& class_weights);

}  // namespace proxyseg
