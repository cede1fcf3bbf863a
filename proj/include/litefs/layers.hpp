#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "litefs/ops.hpp"
#include "litefs/tensor.hpp"

namespace litefs {

template <typename T>
struct Conv {
  Tensor<T> weight;  // [Cout, Cin, k, k]
  Tensor<T> bias;    // [Cout]
  int stride = 1;
  int padding = 1;

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, padding); }
  std::int64_t out_channels() const { return weight.dim(0); }
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // [Dout, Din]
  Tensor<T> bias;    // [Dout]

  Tensor<T> operator()(const Tensor<T>& x) const { return fully_connected(x, weight, bias); }
};

// Creates and registers named parameters (learned) and buffers (running
// statistics). Handles returned to layers share storage with the registry, so
// serialization and the optimizer see exactly what the forward pass uses.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  // He-normal init for a leaky-relu fan-in, multiplied by `gain`.
  Conv<T> conv(const std::string& name, std::int64_t cin, std::int64_t cout, int kernel, int stride, int padding,
               double gain = 1.0, double slope = 0.2);
  Linear<T> linear(const std::string& name, std::int64_t din, std::int64_t dout, double weight_std,
                   double bias_value);
  RunningStats<T> running_stats(const std::string& name, std::int64_t channels, double momentum);

  std::vector<NamedTensor<T>>& parameters() { return params_; }
  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

 private:
  Tensor<T> normal(Shape shape, double stddev);
  void add_param(const std::string& name, Tensor<T> t);

  std::mt19937_64 rng_;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace litefs
