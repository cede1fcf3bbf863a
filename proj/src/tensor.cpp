#include "litefs/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace litefs {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent <= 0) throw DimensionError("non-positive extent in shape " + shape_string(shape));
    n *= extent;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
  storage_ = std::make_shared<Storage>();
  storage_->values.assign(static_cast<std::size_t>(numel_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
  if (static_cast<std::int64_t>(values.size()) != numel_) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values.size()) +
                         " values");
  }
  storage_ = std::make_shared<Storage>();
  storage_->values.assign(values.begin(), values.end());
}

template <typename T>
void Tensor<T>::require_defined() const {
  if (!storage_) throw UsageError("use of an undefined tensor");
}

template <typename T>
std::int64_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  require_defined();
  return storage_->values;
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  require_defined();
  return storage_->values;
}

template <typename T>
T Tensor<T>::item() const {
  require_defined();
  if (numel_ != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  return storage_->values[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  require_defined();
  storage_->requires_grad = on;
  if (on) {
    storage_->grad.assign(storage_->values.size(), T{0});
  } else {
    storage_->grad.clear();
    storage_->grad.shrink_to_fit();
  }
  return *this;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  require_defined();
  if (!storage_->requires_grad) throw UsageError("grad() on a tensor that does not require grad");
  if (storage_->grad.size() != storage_->values.size()) storage_->grad.assign(storage_->values.size(), T{0});
  return storage_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() const {
  require_defined();
  if (!storage_->requires_grad) throw UsageError("mutable_grad() on a tensor that does not require grad");
  if (storage_->grad.size() != storage_->values.size()) storage_->grad.assign(storage_->values.size(), T{0});
  return storage_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (storage_ && storage_->requires_grad) std::fill(storage_->grad.begin(), storage_->grad.end(), T{0});
}

template <typename T>
void Tensor<T>::clear_grad() const {
  if (storage_) {
    storage_->grad.clear();
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  require_defined();
  Tensor out(shape_);
  std::copy(storage_->values.begin(), storage_->values.end(), out.storage_->values.begin());
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::view(Shape shape) const {
  require_defined();
  if (shape_numel(shape) != numel_) {
    throw DimensionError("cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template <typename T>
void Tensor<T>::mark_intermediate() {
  require_defined();
  storage_->requires_grad = true;
  storage_->leaf = false;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace litefs
