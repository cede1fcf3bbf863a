#include "litefs/discriminator.hpp"

namespace litefs {

void DiscriminatorConfig::validate() const {
  if (base_channels < 1) throw ConfigError("discriminator channels must be positive");
  if (resolution < 32 || (resolution & (resolution - 1)) != 0) {
    throw ConfigError("discriminator resolution must be a power of two >= 32");
  }
  if (!(leaky_slope >= 0.0)) throw ConfigError("invalid discriminator slope");
}

template <typename T>
Tensor<T> Critic<T>::operator()(const Tensor<T>& image) const {
  if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != input_size || image.dim(3) != input_size) {
    throw DimensionError("critic expects [B,3," + std::to_string(input_size) + "," + std::to_string(input_size) +
                         "], got " + shape_string(image.shape()));
  }
  Tensor<T> x = image;
  for (const auto& s : stages) x = leaky_relu(s(x), slope);
  return head(x);
}

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorConfig config, std::uint64_t seed)
    : config_(config), store_(seed) {
  config_.validate();
  const std::int64_t c = config_.base_channels;
  const std::array<std::int64_t, 4> widths{c, 2 * c, 4 * c, 8 * c};
  const std::array<const char*, 3> names{"quarter", "half", "full"};
  for (std::size_t s = 0; s < 3; ++s) {
    auto& critic = critics_[s];
    critic.input_size = config_.resolution >> (2 - s);
    critic.slope = config_.leaky_slope;
    std::int64_t cin = 3;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const int stride = i < 3 ? 2 : 1;
      const int pad = i < 3 ? 1 : 2;
      critic.stages.push_back(store_.conv(std::string("D.") + names[s] + ".c" + std::to_string(i), cin, widths[i], 4,
                                          stride, pad, 1.0, config_.leaky_slope));
      cin = widths[i];
    }
    critic.head = store_.conv(std::string("D.") + names[s] + ".head", cin, 1, 4, 1, 2, 1.0, 1.0);
  }
}

template <typename T>
std::vector<Tensor<T>> Discriminator<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& p : store_.parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::int64_t Discriminator<T>::param_count() const {
  std::int64_t n = 0;
  for (const auto& p : store_.parameters()) n += p.tensor.numel();
  return n;
}

template struct Critic<float>;
template struct Critic<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace litefs
