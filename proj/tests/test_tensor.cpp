#include "doctest.h"
#include "proxyseg/errors.hpp"
#include "proxyseg/ops.hpp"
#include "proxyseg/optim.hpp"
#include "proxyseg/tensor.hpp"

using namespace proxyseg;

TEST_CASE("tensor construction checks element count") {
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
  const auto t = Tensor::full({2, 3}, 1.5f);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS_AS(t.dim(2), ShapeError);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("handles share storage, clone and detach do not") {
  auto a = Tensor::from_data({3}, {1, 2, 3}, true);
  auto b = a;
  b.data()[0] = 7;
  CHECK(a.data()[0] == 7);
  CHECK(a.same_storage(b));

  auto c = a.clone();
  c.data()[1] = -1;
  CHECK(a.data()[1] == 2);
  CHECK(c.requires_grad());

  const auto d = a.detach();
  CHECK_FALSE(d.requires_grad());
  CHECK_FALSE(d.same_storage(a));
}

TEST_CASE("backward of the identity loss seeds a unit gradient") {
  auto x = Tensor::from_data({1}, {3.0f}, true);
  Tape<float> tape;
  auto loss = scale(tape, x, 1.0f);
  backward(loss, tape);
  CHECK(x.grad()[0] == 1.0f);
}

TEST_CASE("tape can be replayed only once") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  auto y = Tensor::from_data({2}, {3, 4}, false);
  Tape<float> tape;
  auto loss = dot(tape, x, y);
  backward(loss, tape);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(backward(loss, tape), TapeError);
  CHECK(x.grad()[0] == 3.0f);
  CHECK(x.grad()[1] == 4.0f);
}

TEST_CASE("backward requires a scalar and a recording tape") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  {
    Tape<float> tape;
    auto y = scale(tape, x, 2.0f);
    CHECK_THROWS_AS(backward(y, tape), ShapeError);
  }
  {
    Tape<float> tape(Tape<float>::Mode::inference);
    auto y = dot(tape, x, x);
    CHECK(tape.size() == 0);
    CHECK_THROWS_AS(backward(y, tape), TapeError);
  }
}

TEST_CASE("disconnected parameter keeps an exactly zero gradient") {
  auto used = Tensor::from_data({2}, {1, 2}, true);
  auto unused = Tensor::from_data({2}, {5, 6}, true);
  Tape<float> tape;
  auto loss = dot(tape, used, used);
  backward(loss, tape);
  CHECK(unused.grad()[0] == 0.0f);
  CHECK(unused.grad()[1] == 0.0f);
}

TEST_CASE("sgd_step follows the momentum recurrence") {
  SUBCASE("plain step") {
    auto p = Tensor::from_data({1}, {1.0f}, true);
    auto v = Tensor::zeros({1});
    p.grad()[0] = 2.0f;
    std::vector<Tensor> ps{p}, vs{v};
    sgd_step<float>(ps, vs, 0.1f, 0.0f, 0.0f);
    CHECK(p.data()[0] == doctest::Approx(0.8f));
    CHECK(p.grad()[0] == 0.0f);
  }
  SUBCASE("lr 0 leaves params but updates velocity") {
    auto p = Tensor::from_data({1}, {1.0f}, true);
    auto v = Tensor::zeros({1});
    p.grad()[0] = 2.0f;
    std::vector<Tensor> ps{p}, vs{v};
    sgd_step<float>(ps, vs, 0.0f, 0.9f, 0.0f);
    CHECK(p.data()[0] == 1.0f);
    CHECK(v.data()[0] == 2.0f);
  }
  SUBCASE("two steps with momentum 0.9 move by g + 1.9 g") {
    const double g = 0.5;
    auto p = Tensor64::from_data({1}, {0.0}, true);
    auto v = Tensor64::zeros({1});
    std::vector<Tensor64> ps{p}, vs{v};
    for (int i = 0; i < 2; ++i) {
      p.grad()[0] = g;
      sgd_step<double>(ps, vs, 1.0, 0.9, 0.0);
    }
    CHECK(p.data()[0] == doctest::Approx(-(g + 1.9 * g)).epsilon(1e-12));
  }
  SUBCASE("weight decay adds to the gradient") {
    auto p = Tensor64::from_data({1}, {2.0}, true);
    auto v = Tensor64::zeros({1});
    std::vector<Tensor64> ps{p}, vs{v};
    p.grad()[0] = 0.0;
    sgd_step<double>(ps, vs, 1.0, 0.0, 0.25);
    CHECK(p.data()[0] == doctest::Approx(1.5));
  }
  SUBCASE("missing gradient is an error") {
    auto p = Tensor::from_data({1}, {1.0f}, false);
    auto v = Tensor::zeros({1});
    std::vector<Tensor> ps{p}, vs{v};
    CHECK_THROWS_AS(sgd_step<float>(ps, vs, 0.1f, 0.9f, 0.0f), Error);
  }
}
