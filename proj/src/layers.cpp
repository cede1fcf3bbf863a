#include "litefs/layers.hpp"

#include <cmath>

namespace litefs {

template <typename T>
Tensor<T> ParamStore<T>::normal(Shape shape, double stddev) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.mutable_values()) v = static_cast<T>(dist(rng_) * stddev);
  return t;
}

template <typename T>
void ParamStore<T>::add_param(const std::string& name, Tensor<T> t) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name " + name);
  }
  t.set_requires_grad(true);
  params_.push_back(NamedTensor<T>{name, std::move(t)});
}

template <typename T>
Conv<T> ParamStore<T>::conv(const std::string& name, std::int64_t cin, std::int64_t cout, int kernel, int stride,
                            int padding, double gain, double slope) {
  const double fan_in = static_cast<double>(cin) * kernel * kernel;
  const double stddev = gain * std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
  Conv<T> c{normal(Shape{cout, cin, kernel, kernel}, stddev), Tensor<T>(Shape{cout}, T{0}), stride, padding};
  add_param(name + ".weight", c.weight);
  add_param(name + ".bias", c.bias);
  return c;
}

template <typename T>
Linear<T> ParamStore<T>::linear(const std::string& name, std::int64_t din, std::int64_t dout, double weight_std,
                                double bias_value) {
  Linear<T> l{normal(Shape{dout, din}, weight_std), Tensor<T>(Shape{dout}, static_cast<T>(bias_value))};
  add_param(name + ".weight", l.weight);
  add_param(name + ".bias", l.bias);
  return l;
}

template <typename T>
RunningStats<T> ParamStore<T>::running_stats(const std::string& name, std::int64_t channels, double momentum) {
  RunningStats<T> rs(channels, momentum);
  buffers_.push_back(NamedTensor<T>{name + ".running_mean", rs.mean});
  buffers_.push_back(NamedTensor<T>{name + ".running_var", rs.var});
  return rs;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace litefs
