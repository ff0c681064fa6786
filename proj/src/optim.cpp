#include "proxyseg/optim.hpp"

#include "proxyseg/errors.hpp"

namespace proxyseg {

template <typename T>
void sgd_step(std::span<BasicTensor<T>> params, std::span<BasicTensor<T>> velocity, T lr, T momentum,
              T weight_decay) {
  if (params.size() != velocity.size()) throw ShapeError("sgd_step: one velocity buffer per parameter required");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw Error("sgd_step: parameter " + std::to_string(i) + " has no gradient");
    if (velocity[i].numel() != params[i].numel()) throw ShapeError("sgd_step: velocity size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = params[i].grad();
    auto v = velocity[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum * v[j] + g[j] + weight_decay * p[j];
      p[j] -= lr * v[j];
    }
    params[i].zero_grad();
  }
}

template void sgd_step(std::span<BasicTensor<float>>, std::span<BasicTensor<float>>, float, float, float);
template void sgd_step(std::span<BasicTensor<double>>, std::span<BasicTensor<double>>, double, double, double);

}  // namespace proxyseg
