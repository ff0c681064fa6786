#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "proxyseg/rng.hpp"
#include "proxyseg/tensor.hpp"

namespace proxyseg::testing {

struct GradCheck {
  bool ok = true;
  std::size_t elements = 0;
  double worst_abs = 0.0;
  std::string first_failure;
};

using LossFn = std::function<Tensor64(Tape<double>&)>;

// Central differences on every element of every input against the tape's
// gradient. An element passes when |analytic - numeric| <= abs_tol or
// <= rel_tol * max(|analytic|, |numeric|).
GradCheck check_gradients(const std::vector<Tensor64>& inputs, const LossFn& loss, double step = 1e-6,
                          double rel_tol = 1e-3, double abs_tol = 1e-5);

// Normal entries with requires_grad set. When min_magnitude > 0 entries are
// pushed away from zero (for inputs of kinked functions).
Tensor64 random_tensor(const Shape& shape, RngStream& rng, double scale = 1.0, double min_magnitude = 0.0);

struct SuiteEntry {
  std::string op;
  int instances = 0;
  int passed = 0;
  std::size_t elements = 0;
  std::string first_failure;
};

// Every differentiable op plus joint_loss on a micro model, `instances`
// random cases each.
std::vector<SuiteEntry> run_gradient_suite(int instances, std::uint64_t seed);

}  // namespace proxyseg::testing
