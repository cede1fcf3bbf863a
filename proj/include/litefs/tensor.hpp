#pragma once

#include <cstdint>
#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "litefs/errors.hpp"

namespace litefs {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Cache-line aligned allocation: vectorized kernels peel loops according to the
// data address, so a fixed alignment keeps results independent of heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{alignment}); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

// Dense row-major tensor. Copies share storage (handle semantics); values are
// treated as immutable once an op has produced them, only the gradient
// accumulator and parameter values (under the optimizer) are written later.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const noexcept { return shape_; }
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t numel() const noexcept { return numel_; }

  std::span<const T> values() const;
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const noexcept { return storage_ && storage_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  // Leaf tensors are created by the user (parameters, inputs); non-leaf tensors
  // are op outputs whose gradients are scratch space for one reverse sweep.
  bool is_leaf() const noexcept { return !storage_ || storage_->leaf; }

  bool grad_allocated() const noexcept { return storage_ && !storage_->grad.empty(); }
  std::span<const T> grad() const;
  // Gradient accumulators are scratch state shared by every handle to the
  // storage, so they stay writable through const handles.
  std::span<T> mutable_grad() const;
  void zero_grad() const;
  void clear_grad() const;

  // Fresh storage with the same values, detached from any tape.
  Tensor detach() const;
  // Same storage viewed with another shape of equal element count.
  Tensor view(Shape shape) const;
  bool shares_storage(const Tensor& other) const noexcept { return storage_ == other.storage_; }

  // Used by ops to mark their outputs as tape intermediates.
  void mark_intermediate();

 private:
  struct Storage {
    AlignedVector<T> values;
    AlignedVector<T> grad;
    bool requires_grad = false;
    bool leaf = true;
  };

  void require_defined() const;

  Shape shape_;
  std::int64_t numel_ = 0;
  std::shared_ptr<Storage> storage_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

}  // namespace litefs
