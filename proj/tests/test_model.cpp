#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "proxyseg/errors.hpp"
#include "proxyseg/model.hpp"
#include "proxyseg/ops.hpp"

using namespace proxyseg;

namespace {

ModelConfig small_config(std::uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.in_channels = 3;
  cfg.base_width = 8;
  cfg.num_classes = 4;
  cfg.seed = seed;
  return cfg;
}

Tensor random_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<float> v(n * 3 * h * w);
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return Tensor::from_data({n, 3, h, w}, std::move(v));
}

BranchLogits<float> infer(const SegNet& model, const Tensor& images) {
  Tape<float> tape(Tape<float>::Mode::inference);
  return forward(tape, model, images);
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = small_config();
  cfg.base_width = 6;
  CHECK_THROWS_AS(SegNet{cfg}, ConfigError);
  cfg = small_config();
  cfg.num_classes = 1;
  CHECK_THROWS_AS(SegNet{cfg}, ConfigError);
}

TEST_CASE("initialisation") {
  const SegNet a(small_config());
  const SegNet b(small_config());
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i].data().begin(), pa[i].data().end(), pb[i].data().begin()));
  }
  const auto names = a.parameter_names();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (names[i].ends_with("bias")) {
      for (float v : pa[i].data()) CHECK(v == 0.0f);
    }
  }
  CHECK(a.branch_parameter_count(0) == a.branch_parameter_count(1));
  CHECK(a.branch_parameter_count(0) < a.encoder_parameter_count());
  CHECK(a.velocity().size() == pa.size());

  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SegNet m(small_config(seed));
    const double c = decoder_cosine(m);
    CHECK(std::abs(c) < 0.5);
    total += std::abs(c);
  }
  CHECK(total / 10 < 0.2);
}

TEST_CASE("copies are deep") {
  SegNet a(small_config());
  SegNet b = a;
  b.parameters()[0].data()[0] += 1.0f;
  CHECK(a.parameters()[0].data()[0] != b.parameters()[0].data()[0]);
}

TEST_CASE("forward shapes and averaging") {
  const SegNet model(small_config());
  const auto images = random_images(2, 12, 8, 1);
  const auto out = infer(model, images);
  const Shape want{2, 4, 12, 8};
  CHECK(out.logits1.shape() == want);
  CHECK(out.logits2.shape() == want);
  CHECK(out.logits_avg.shape() == want);
  for (std::size_t i = 0; i < out.logits_avg.numel(); ++i) {
    CHECK(out.logits_avg.data()[i] == doctest::Approx((out.logits1.data()[i] + out.logits2.data()[i]) / 2));
  }
  CHECK_THROWS_AS(infer(model, random_images(1, 10, 8, 1)), ShapeError);
  CHECK_THROWS_AS(infer(model, Tensor::zeros({1, 2, 8, 8})), ShapeError);
}

TEST_CASE("identical branches") {
  SegNet model(small_config());
  model.copy_branch(0, 1);
  const auto out = infer(model, random_images(1, 8, 8, 2));
  for (std::size_t i = 0; i < out.logits1.numel(); ++i) {
    CHECK(out.logits1.data()[i] == out.logits2.data()[i]);
    CHECK(out.logits_avg.data()[i] == out.logits1.data()[i]);
  }
  const auto [w1, w2] = flatten_decoder_weights(model);
  CHECK(w1 == w2);
  CHECK(agreement_map(out.logits1, out.logits2).count() == 64);
}

TEST_CASE("flatten_decoder_weights") {
  const SegNet model(small_config());
  const auto [w1, w2] = flatten_decoder_weights(model);
  CHECK(w1.size() == w2.size());
  const auto again = flatten_decoder_weights(model);
  CHECK(again.first == w1);
  CHECK(again.second == w2);
  const auto with_bias = flatten_decoder_weights(model, true);
  CHECK(with_bias.first.size() > w1.size());
}

TEST_CASE("similarity_penalty examples") {
  Tape<double> tape(Tape<double>::Mode::inference);
  const auto a = Tensor64::from_data({2}, {1, 0});
  const auto b = Tensor64::from_data({2}, {0, 1});
  CHECK(similarity_penalty(tape, a, b, 0.01, SimilarityMode::dot).item() == 0.0);
  CHECK(similarity_penalty(tape, a, b, 0.01, SimilarityMode::cosine).item() == 0.0);
  const auto c = Tensor64::from_data({2}, {1, 2});
  const auto d = Tensor64::from_data({2}, {3, 4});
  CHECK(similarity_penalty(tape, c, d, 0.01, SimilarityMode::dot).item() == doctest::Approx(0.11).epsilon(1e-12));
  const auto u = Tensor64::from_data({2}, {0.6, 0.8});
  CHECK(similarity_penalty(tape, u, u, 0.01, SimilarityMode::cosine).item() == doctest::Approx(0.01).epsilon(1e-9));
  CHECK_THROWS_AS(similarity_penalty(tape, a, Tensor64::zeros({3}), 0.01, SimilarityMode::dot), ShapeError);
}

TEST_CASE("agreement_map") {
  // pixel 0: argmax 2 vs 3; pixel 1: tie (1,1,..) resolves to class 0 vs argmax 0
  auto l1 = Tensor::from_data({1, 4, 1, 2}, {0, 1, 0, 1, 5, 0, 1, 0});
  auto l2 = Tensor::from_data({1, 4, 1, 2}, {0, 9, 0, 0, 1, 0, 5, 0});
  const auto m = agreement_map(l1, l2);
  CHECK_FALSE(m[0]);
  CHECK(m[1]);
  CHECK(agreement_map(l2, l1) == m);
  CHECK(argmax_labels(l1).values == std::vector<std::uint8_t>{2, 0});
  CHECK_THROWS_AS(agreement_map(l1, Tensor::zeros({1, 3, 1, 2})), ShapeError);
}

TEST_CASE("joint_loss examples") {
  SegNet model(small_config());
  model.copy_branch(0, 1);
  const auto images = random_images(1, 8, 8, 4);
  LabelMap labels(1, 8, 8);
  for (std::size_t i = 0; i < labels.size(); ++i) labels.values[i] = static_cast<std::uint8_t>(i % 4);
  const auto weights = Tensor::full({4}, 1.0f);
  const PixelMask all(1, 8, 8, true), none(1, 8, 8, false);
  Tape<float> tape(Tape<float>::Mode::inference);
  const PenaltyOptions off{0.0, SimilarityMode::dot, false};

  CHECK(joint_loss(tape, model, images, labels, none, none, weights, off).item() == 0.0f);

  const auto out = forward(tape, model, images);
  const float single = masked_weighted_cross_entropy(tape, out.logits1, labels, all, weights).item();
  CHECK(joint_loss(tape, model, images, labels, all, all, weights, off).item() == doctest::Approx(2 * single));

  const auto [w1, w2] = flatten_decoder_weights(model);
  double d = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) d += double(w1[i]) * w2[i];
  REQUIRE(d > 0.0);
  const float lo = joint_loss(tape, model, images, labels, all, all, weights, {0.01, SimilarityMode::dot, false}).item();
  const float hi = joint_loss(tape, model, images, labels, all, all, weights, {0.1, SimilarityMode::dot, false}).item();
  CHECK(hi > lo);
}

TEST_CASE("encoder gradient is the sum of both branch paths") {
  const SegNet64 model([] {
    ModelConfig c;
    c.in_channels = 2;
    c.base_width = 4;
    c.num_classes = 3;
    c.seed = 9;
    return c;
  }());
  RngStream rng(21);
  const auto images = testing::random_tensor({1, 2, 8, 8}, rng);
  LabelMap labels(1, 8, 8, 1);
  PixelMask one(1, 8, 8, false), none(1, 8, 8, false);
  one.set(27, true);
  const auto weights = Tensor64::full({3}, 1.0);
  const PenaltyOptions off{0.0, SimilarityMode::dot, false};
  auto encoder_grad = [&](const PixelMask& m1, const PixelMask& m2) {
    auto params = model.parameters();
    for (auto& p : params) {
      p.set_requires_grad(true);
      p.zero_grad();
    }
    Tape<double> tape;
    auto loss = joint_loss(tape, model, images, labels, m1, m2, weights, off);
    backward(loss, tape);
    return std::vector<double>(params[0].grad().begin(), params[0].grad().end());
  };
  const auto both = encoder_grad(one, one);
  const auto g1 = encoder_grad(one, none);
  const auto g2 = encoder_grad(none, one);
  for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-10));
}
