#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "litefs/generator.hpp"
#include "litefs/layers.hpp"

namespace litefs {

struct DiscriminatorConfig {
  std::int64_t base_channels = 64;  // stage widths base, 2x, 4x, 8x
  std::int64_t resolution = 256;    // full-scale input; critics see R/4, R/2 and R
  double leaky_slope = 0.2;

  void validate() const;
};

// Patch critic: three 4x4 stride-2 stages, one 4x4 stride-1 stage and a
// 1-channel 4x4 head; no normalization.
template <typename T>
struct Critic {
  std::int64_t input_size = 0;
  std::vector<Conv<T>> stages;
  Conv<T> head;
  double slope = 0.2;

  Tensor<T> operator()(const Tensor<T>& image) const;
};

// Three independent critics, one per generator output scale.
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig config, std::uint64_t seed = 2);

  Tensor<T> forward(const Tensor<T>& image, ScaleIndex scale) const { return critics_[scale](image); }

  const DiscriminatorConfig& config() const noexcept { return config_; }
  const Critic<T>& critic(ScaleIndex scale) const { return critics_[scale]; }

  std::vector<NamedTensor<T>>& parameters() { return store_.parameters(); }
  const std::vector<NamedTensor<T>>& parameters() const { return store_.parameters(); }
  std::vector<Tensor<T>> parameter_tensors() const;
  std::int64_t param_count() const;

 private:
  DiscriminatorConfig config_;
  ParamStore<T> store_;
  std::array<Critic<T>, 3> critics_;
};

extern template struct Critic<float>;
extern template struct Critic<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;

}  // namespace litefs
