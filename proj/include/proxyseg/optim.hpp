#pragma once

#include <span>

#include "proxyseg/tensor.hpp"

namespace proxyseg {

/// One SGD update with momentum and L2 weight decay, applied in place:
///
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
///
/// Gradients are zeroed afterwards. `velocity[i]` must match `params[i]` in
/// size; every parameter must carry a gradient buffer.
template <typename T>
void sgd_step(std::span<BasicTensor<T>> params, std::span<BasicTensor<T>> velocity, T lr, T momentum,
              T weight_decay);

}  // namespace proxyseg
