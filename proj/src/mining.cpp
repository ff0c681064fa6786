#include "proxyseg/mining.hpp"

#include <array>

#include "proxyseg/errors.hpp"
#include "proxyseg/model.hpp"

namespace proxyseg {

double variation_ratio(std::span<const std::uint8_t> votes) {
  if (votes.size() < 2) throw ConfigError("variation ratio needs at least two ensemble members");
  std::array<std::size_t, 256> counts{};
  for (auto v : votes) ++counts[v];
  std::size_t mode_count = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > mode_count) mode_count = counts[c];
  }
  return 1.0 - static_cast<double>(mode_count) / static_cast<double>(votes.size());
}

std::vector<double> variation_ratios(std::span<const LabelMap> member_predictions) {
  if (member_predictions.size() < 2) throw ConfigError("variation ratios need at least two ensemble members");
  const auto& first = member_predictions.front();
  for (const auto& m : member_predictions) {
    if (!m.same_geometry(first)) throw ShapeError("variation ratios: member maps differ in shape");
  }
  std::vector<double> out(first.size());
  std::vector<std::uint8_t> votes(member_predictions.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (std::size_t e = 0; e < votes.size(); ++e) votes[e] = member_predictions[e].values[p];
    out[p] = variation_ratio(votes);
  }
  return out;
}

template <typename T>
ProxyLabels proxy_labels(const BasicTensor<T>& logits_avg, const PixelMask& agreement) {
  ProxyLabels labels = argmax_labels(logits_avg);
  if (!agreement.same_geometry(labels)) throw ShapeError("proxy_labels: agreement map does not match logits");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!agreement[i]) labels.values[i] = kIgnoreLabel;
  }
  return labels;
}

PixelMask target_easy_mask(const PixelMask& agreement) {
  return agreement;
}

PixelMask source_hard_mask(const PixelMask& agreement, double rho, RngStream& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("source_hard_mask: rho must lie in [0, 1]");
  PixelMask mask(agreement.batch, agreement.height, agreement.width, true);
  if (rho == 0.0) return mask;
  for (std::size_t i = 0; i < agreement.size(); ++i) {
    if (agreement[i] && rng.bernoulli(rho)) mask.set(i, false);
  }
  return mask;
}

double agreement_fraction(const PixelMask& agreement, const PixelMask& valid) {
  if (!agreement.same_geometry(valid)) throw ShapeError("agreement_fraction: masks differ in shape");
  std::size_t agreed = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) continue;
    ++total;
    agreed += agreement[i] ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(agreed) / static_cast<double>(total);
}

template ProxyLabels proxy_labels(const BasicTensor<float>&, const PixelMask&);
template ProxyLabels proxy_labels(const BasicTensor<double>&, const PixelMask&);

}  // namespace proxyseg
