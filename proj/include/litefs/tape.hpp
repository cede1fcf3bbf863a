#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "litefs/tensor.hpp"

namespace litefs {

// Ordered record of differentiable ops executed while the tape was active.
// Ops append themselves after their inputs exist, so the record is already in
// topological order and a reverse walk is a valid reverse-mode sweep.
class Tape {
 public:
  struct Record {
    const char* op;
    std::function<void()> backward;
    std::function<void()> reset;
  };

  void record(const char* op, std::function<void()> backward, std::function<void()> reset);
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  void clear() noexcept { records_.clear(); }

  template <typename T>
  friend void reverse_accumulate(Tape& tape, const Tensor<T>& loss);

 private:
  std::vector<Record> records_;
};

// Makes `tape` the recording target for this thread until destruction; nests.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording for this thread until destruction.
class NoTapeScope {
 public:
  NoTapeScope();
  ~NoTapeScope();
  NoTapeScope(const NoTapeScope&) = delete;
  NoTapeScope& operator=(const NoTapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

// Seeds d(loss)/d(loss) = 1 and walks the tape backwards once, accumulating
// into every requires_grad leaf reachable from `loss`. Intermediate gradients
// are reset first, so repeated calls add whole gradients to the leaves.
template <typename T>
void reverse_accumulate(Tape& tape, const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("reverse_accumulate needs a scalar loss");
  }
  if (!loss.requires_grad() || loss.is_leaf()) {
    throw UsageError("reverse_accumulate: loss was not recorded on a tape");
  }
  for (auto& r : tape.records_) r.reset();
  Tensor<T> seed = loss;
  seed.mutable_grad()[0] += T{1};
  for (auto it = tape.records_.rbegin(); it != tape.records_.rend(); ++it) it->backward();
}

}  // namespace litefs
