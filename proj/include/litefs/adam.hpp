#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "litefs/tensor.hpp"

namespace litefs {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators for one parameter list. Moments are created
// lazily on the first step so that they always match the parameter shapes.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// One bias-corrected Adam update of every parameter from its accumulated grad.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state);

template <typename T>
void zero_grads(std::span<Tensor<T>> params) {
  for (auto& p : params) p.zero_grad();
}

extern template void adam_step<float>(std::span<Tensor<float>>, AdamState<float>&);
extern template void adam_step<double>(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace litefs
