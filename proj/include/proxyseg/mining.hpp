#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "proxyseg/label_map.hpp"
#include "proxyseg/rng.hpp"
#include "proxyseg/tensor.hpp"

namespace proxyseg {

// Proxy targets for unlabeled images: predicted classes, `kIgnoreLabel`
// where the prediction is not trusted.
using ProxyLabels = LabelMap;

/// Variation ratio of one pixel's ensemble votes: 1 - f_m / E, where f_m is
/// the count of the modal class (ties resolve to the lowest class id).
double variation_ratio(std::span<const std::uint8_t> votes);

/// Per-pixel variation ratios over E >= 2 member prediction maps.
std::vector<double> variation_ratios(std::span<const LabelMap> member_predictions);

/// Argmax of the averaged logits where the branches agree, ignore elsewhere.
template <typename T>
ProxyLabels proxy_labels(const BasicTensor<T>& logits_avg, const PixelMask& agreement);

/// Target easy mining: keep exactly the agreed pixels.
PixelMask target_easy_mask(const PixelMask& agreement);

/// Source hard mining: disagreed pixels are always kept; each agreed pixel is
/// dropped independently with probability `rho`, drawing from `rng` only for
/// agreed pixels.
PixelMask source_hard_mask(const PixelMask& agreement, double rho, RngStream& rng);

/// Fraction of valid pixels that are agreed; 0 when nothing is valid.
double agreement_fraction(const PixelMask& agreement, const PixelMask& valid);

}  // namespace proxyseg
