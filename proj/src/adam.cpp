#include "litefs/adam.hpp"

#include <cmath>

namespace litefs {

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
  const AdamConfig& cfg = state.config;
  if (!(cfg.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.shape(), T{0});
      state.second_moment.emplace_back(p.shape(), T{0});
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam: state holds " + std::to_string(state.first_moment.size()) + " moments for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(cfg.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg.epsilon);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (state.first_moment[k].shape() != p.shape()) {
      throw DimensionError("adam: moment shape mismatch for parameter " + std::to_string(k));
    }
    if (!p.requires_grad()) continue;
    const auto g = p.grad();
    auto x = p.mutable_values();
    auto m = state.first_moment[k].mutable_values();
    auto v = state.second_moment[k].mutable_values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      x[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

template void adam_step<float>(std::span<Tensor<float>>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace litefs
