#include "samples.hpp"

#include <algorithm>

namespace proxyseg::testing {

SegPack random_pack(RngStream& rng) {
  SegPack p;
  p.channels = static_cast<std::uint16_t>(1 + rng.below(4));
  p.height = static_cast<std::uint16_t>(1 + rng.below(9));
  p.width = static_cast<std::uint16_t>(1 + rng.below(9));
  p.num_classes = static_cast<std::uint16_t>(2 + rng.below(20));
  const std::size_t n = rng.below(5);
  p.labels.resize(n * p.plane());
  for (auto& v : p.labels) v = rng.bernoulli(0.1) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.below(p.num_classes));
  p.images.resize(n * p.channels * p.plane());
  for (auto& v : p.images) v = static_cast<float>(rng.normal() * 100.0);
  return p;
}

CheckpointInstance random_checkpoint(RngStream& rng) {
  ModelConfig cfg;
  cfg.in_channels = 1 + rng.below(3);
  cfg.base_width = 4 * (1 + rng.below(3));
  cfg.num_classes = 2 + rng.below(6);
  cfg.seed = rng.next_u64();
  SegNet model(cfg);
  for (auto& v : model.velocity()) {
    for (auto& x : v.data()) x = static_cast<float>(rng.normal());
  }
  for (auto p : model.parameters()) {
    for (auto& x : p.data()) x += static_cast<float>(rng.normal() * 0.01);
  }
  auto state = RunState::fresh(rng.next_u64());
  state.epoch = static_cast<int>(rng.below(20));
  state.iteration = rng.next_u64() >> 20;
  for (auto* s : state.streams()) *s = RngStream(s->key(), rng.below(1u << 30));
  return {std::move(model), state};
}

bool same_model(const SegNet& a, const SegNet& b) {
  if (!(a.config() == b.config())) return false;
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].shape() != pb[i].shape()) return false;
    if (!std::ranges::equal(pa[i].data(), pb[i].data())) return false;
    if (!std::ranges::equal(a.velocity()[i].data(), b.velocity()[i].data())) return false;
  }
  return true;
}

}  // namespace proxyseg::testing
