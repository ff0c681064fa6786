#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "proxyseg/label_map.hpp"
#include "proxyseg/model.hpp"
#include "proxyseg/ops.hpp"

namespace proxyseg::testing {

GradCheck check_gradients(const std::vector<Tensor64>& inputs, const LossFn& loss, double step, double rel_tol,
                          double abs_tol) {
  for (const auto& t : inputs) {
    auto h = t;
    h.set_requires_grad(true);
    h.zero_grad();
  }
  {
    Tape<double> tape;
    auto l = loss(tape);
    backward(l, tape);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto eval = [&] {
    Tape<double> tape(Tape<double>::Mode::inference);
    return loss(tape).item();
  };

  GradCheck result;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto handle = inputs[ti];
    auto data = handle.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = eval();
      data[i] = saved - step;
      const double down = eval();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[ti][i];
      const double diff = std::abs(a - numeric);
      ++result.elements;
      result.worst_abs = std::max(result.worst_abs, diff);
      const bool ok = diff <= abs_tol || diff <= rel_tol * std::max(std::abs(a), std::abs(numeric));
      if (!ok && result.ok) {
        result.ok = false;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "input %zu element %zu: analytic %.10g numeric %.10g", ti, i, a, numeric);
        result.first_failure = buf;
      }
    }
  }
  return result;
}

Tensor64 random_tensor(const Shape& shape, RngStream& rng, double scale, double min_magnitude) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = scale * rng.normal();
    if (min_magnitude > 0.0 && std::abs(x) < min_magnitude) x = x < 0 ? x - min_magnitude : x + min_magnitude;
  }
  return Tensor64::from_data(shape, std::move(v), true);
}

namespace {

// Projects an op output onto a fixed random direction so every output
// element contributes to a scalar loss.
Tensor64 project(Tape<double>& tape, const Tensor64& out, const Tensor64& direction) {
  return dot(tape, out, direction);
}

Tensor64 fixed(const Shape& shape, RngStream& rng) {
  auto t = random_tensor(shape, rng);
  t.set_requires_grad(false);
  return t;
}

LabelMap random_labels(std::size_t n, std::size_t h, std::size_t w, std::size_t k, RngStream& rng,
                       double ignore_rate) {
  LabelMap m(n, h, w);
  for (auto& v : m.values) {
    v = rng.bernoulli(ignore_rate) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.below(k));
  }
  return m;
}

PixelMask random_mask(std::size_t n, std::size_t h, std::size_t w, RngStream& rng, double keep) {
  PixelMask m(n, h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.bernoulli(keep));
  return m;
}

using Case = std::function<GradCheck(int, RngStream&)>;

std::vector<std::pair<std::string, Case>> cases() {
  std::vector<std::pair<std::string, Case>> out;

  out.emplace_back("conv2d", [](int i, RngStream& rng) {
    struct Geometry {
      std::size_t k, stride, pad;
    };
    static const Geometry geoms[] = {{3, 1, 1}, {3, 2, 1}, {1, 1, 0}, {3, 1, 0}};
    const auto g = geoms[i % 4];
    const std::size_t cin = 1 + rng.below(2), cout = 1 + rng.below(3);
    const std::size_t h = 4 + rng.below(2), w = 4 + rng.below(2);
    auto x = random_tensor({1, cin, h, w}, rng);
    auto wt = random_tensor({cout, cin, g.k, g.k}, rng, 0.5);
    auto b = random_tensor({cout}, rng);
    Tape<double> probe(Tape<double>::Mode::inference);
    const auto dir = fixed(conv2d(probe, x, wt, b, g.stride, g.pad).shape(), rng);
    return check_gradients({x, wt, b}, [=](Tape<double>& t) {
      return project(t, conv2d(t, x, wt, b, g.stride, g.pad), dir);
    });
  });

  out.emplace_back("relu", [](int, RngStream& rng) {
    auto x = random_tensor({2, 2, 4, 4}, rng, 1.0, 1e-3);
    const auto dir = fixed(x.shape(), rng);
    return check_gradients({x}, [=](Tape<double>& t) { return project(t, relu(t, x), dir); });
  });

  out.emplace_back("adaptive_avg_pool", [](int i, RngStream& rng) {
    static const std::size_t outs[][2] = {{2, 2}, {1, 1}, {3, 2}, {2, 3}};
    const auto* o = outs[i % 4];
    auto x = random_tensor({1, 1, 4 + rng.below(4), 4 + rng.below(4)}, rng);
    Tape<double> probe(Tape<double>::Mode::inference);
    const auto dir = fixed(adaptive_avg_pool(probe, x, o[0], o[1]).shape(), rng);
    return check_gradients({x}, [=](Tape<double>& t) { return project(t, adaptive_avg_pool(t, x, o[0], o[1]), dir); });
  });

  auto upsample_case = [](UpsampleMode mode) {
    return [mode](int i, RngStream& rng) {
      const std::size_t fh = 1 + static_cast<std::size_t>(i % 3), fw = 1 + static_cast<std::size_t>((i / 3) % 3);
      auto x = random_tensor({2, 2, 1 + rng.below(4), 1 + rng.below(4)}, rng);
      Tape<double> probe(Tape<double>::Mode::inference);
      const auto dir = fixed(upsample(probe, x, fh, fw, mode).shape(), rng);
      return check_gradients({x}, [=](Tape<double>& t) { return project(t, upsample(t, x, fh, fw, mode), dir); });
    };
  };
  out.emplace_back("upsample_nearest", upsample_case(UpsampleMode::nearest));
  out.emplace_back("upsample_bilinear", upsample_case(UpsampleMode::bilinear));

  out.emplace_back("concat_channels", [](int, RngStream& rng) {
    auto a = random_tensor({2, 1 + rng.below(3), 3, 3}, rng);
    auto b = random_tensor({2, 1 + rng.below(3), 3, 3}, rng);
    const std::vector<Tensor64> parts{a, b};
    Tape<double> probe(Tape<double>::Mode::inference);
    const auto dir = fixed(concat_channels<double>(probe, parts).shape(), rng);
    return check_gradients({a, b}, [=](Tape<double>& t) {
      return project(t, concat_channels<double>(t, parts), dir);
    });
  });

  out.emplace_back("add", [](int, RngStream& rng) {
    auto a = random_tensor({2, 3, 2, 2}, rng);
    auto b = random_tensor({2, 3, 2, 2}, rng);
    const auto dir = fixed(a.shape(), rng);
    return check_gradients({a, b}, [=](Tape<double>& t) { return project(t, add(t, a, b), dir); });
  });

  out.emplace_back("scale", [](int, RngStream& rng) {
    auto a = random_tensor({3, 5}, rng);
    const double f = rng.uniform(-2.0, 2.0);
    const auto dir = fixed(a.shape(), rng);
    return check_gradients({a}, [=](Tape<double>& t) { return project(t, scale(t, a, f), dir); });
  });

  out.emplace_back("flatten_concat", [](int, RngStream& rng) {
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor({4, 1, 2}, rng);
    const std::vector<Tensor64> parts{a, b};
    const auto dir = fixed({a.numel() + b.numel()}, rng);
    return check_gradients({a, b}, [=](Tape<double>& t) { return project(t, flatten_concat<double>(t, parts), dir); });
  });

  out.emplace_back("dot", [](int, RngStream& rng) {
    const std::size_t n = 1 + rng.below(20);
    auto a = random_tensor({n}, rng);
    auto b = random_tensor({n}, rng);
    return check_gradients({a, b}, [=](Tape<double>& t) { return dot(t, a, b); });
  });

  out.emplace_back("masked_weighted_cross_entropy", [](int, RngStream& rng) {
    const std::size_t k = 2 + rng.below(4);
    auto logits = random_tensor({1, k, 3, 4}, rng, 2.0);
    auto labels = random_labels(1, 3, 4, k, rng, 0.1);
    auto mask = random_mask(1, 3, 4, rng, 0.7);
    // at least one retained pixel
    mask.set(0, true);
    labels.values[0] = 0;
    std::vector<double> w(k);
    for (auto& v : w) v = rng.uniform(0.5, 2.0);
    const auto weights = Tensor64::from_data({k}, w);
    return check_gradients({logits}, [=](Tape<double>& t) {
      return masked_weighted_cross_entropy(t, logits, labels, mask, weights);
    });
  });

  auto penalty_case = [](SimilarityMode mode) {
    return [mode](int, RngStream& rng) {
      const std::size_t n = 2 + rng.below(30);
      auto a = random_tensor({n}, rng);
      auto b = random_tensor({n}, rng);
      const double beta = rng.uniform(0.01, 1.0);
      return check_gradients({a, b}, [=](Tape<double>& t) { return similarity_penalty(t, a, b, beta, mode); });
    };
  };
  out.emplace_back("similarity_penalty_dot", penalty_case(SimilarityMode::dot));
  out.emplace_back("similarity_penalty_cosine", penalty_case(SimilarityMode::cosine));

  out.emplace_back("joint_loss", [](int i, RngStream& rng) {
    ModelConfig cfg;
    cfg.in_channels = 2;
    cfg.base_width = 4;
    cfg.num_classes = 3;
    cfg.seed = rng.next_u64();
    const SegNet64 model(cfg);
    auto images = random_tensor({2, 2, 8, 8}, rng);
    const auto labels = random_labels(2, 8, 8, 3, rng, 0.1);
    const auto m1 = random_mask(2, 8, 8, rng, 0.8);
    const auto m2 = random_mask(2, 8, 8, rng, 0.8);
    const auto weights = Tensor64::from_data({3}, {1.0, 2.0, 1.0});
    const PenaltyOptions penalty{0.5, i % 2 == 0 ? SimilarityMode::dot : SimilarityMode::cosine, i % 4 == 1};
    auto inputs = model.parameters();
    inputs.push_back(images);
    return check_gradients(inputs, [=](Tape<double>& t) {
      return joint_loss(t, model, images, labels, m1, m2, weights, penalty);
    });
  });

  return out;
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(int instances, std::uint64_t seed) {
  std::vector<SuiteEntry> out;
  std::uint64_t tag = 0;
  for (const auto& [name, run] : cases()) {
    SuiteEntry e;
    e.op = name;
    RngStream rng(mix_seed(seed, ++tag));
    for (int i = 0; i < instances; ++i) {
      const auto r = run(i, rng);
      ++e.instances;
      e.elements += r.elements;
      if (r.ok) {
        ++e.passed;
      } else if (e.first_failure.empty()) {
        e.first_failure = "instance " + std::to_string(i) + ": " + r.first_failure;
      }
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace proxyseg::testing
