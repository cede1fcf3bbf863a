#pragma once

// Central finite-difference oracle used by the gradient tests. It only calls
// the forward path with tape recording disabled, so it stays independent of
// the backward rules it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "litefs/ops.hpp"
#include "litefs/tape.hpp"

namespace litefs::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.mutable_values()) v = static_cast<T>(dist(rng));
  return t;
}

// Reduces any tensor to a scalar with fixed random weights so that every
// output element contributes a distinct gradient.
template <typename T>
Tensor<T> probe_loss(const Tensor<T>& out, std::uint64_t seed = 99) {
  Tensor<T> w = random_tensor<T>(out.shape(), seed);
  return sum(mul(out, w));
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes straddling a kink (one-sided slopes disagree)
};

inline double rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// `loss_fn` builds the scalar loss from the current parameter values.
// `indices[k]` lists the elements of params[k] to probe (empty = all).
inline GradCheckResult grad_check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> params,
                                  std::vector<std::vector<std::size_t>> indices = {}, double h = 1e-5,
                                  double floor = 1e-8) {
  for (auto& p : params) p.set_requires_grad(true);
  {
    Tape tape;
    TapeScope scope(tape);
    auto loss = loss_fn();
    reverse_accumulate(tape, loss);
  }
  GradCheckResult result;
  NoTapeScope off;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    std::vector<std::size_t> idx;
    if (k < indices.size() && !indices[k].empty()) {
      idx = indices[k];
    } else {
      for (std::size_t i = 0; i < static_cast<std::size_t>(p.numel()); ++i) idx.push_back(i);
    }
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (auto i : idx) {
      auto x = p.mutable_values();
      const double saved = x[i];
      const double mid = loss_fn().item();
      x[i] = saved + h;
      const double up = loss_fn().item();
      x[i] = saved - h;
      const double down = loss_fn().item();
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double fwd = (up - mid) / h, bwd = (mid - down) / h;
      if (std::abs(fwd - bwd) > 1e-2 * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
        ++result.skipped;
        continue;
      }
      result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic[i], numeric, floor));
      ++result.checked;
    }
  }
  return result;
}

// Picks `count` random (parameter, element) probes across `params`, weighting
// each tensor by its size; returns them in grad_check's `indices` layout.
inline std::vector<std::vector<std::size_t>> sample_indices(const std::vector<Tensor<double>>& params,
                                                            std::size_t count, std::uint64_t seed = 17) {
  std::vector<std::vector<std::size_t>> out(params.size());
  std::vector<double> sizes;
  for (const auto& p : params) sizes.push_back(static_cast<double>(p.numel()));
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick_tensor(sizes.begin(), sizes.end());
  std::size_t taken = 0;
  while (taken < count) {
    const std::size_t k = pick_tensor(rng);
    std::uniform_int_distribution<std::size_t> pick_elem(0, static_cast<std::size_t>(params[k].numel()) - 1);
    const std::size_t i = pick_elem(rng);
    if (std::find(out[k].begin(), out[k].end(), i) != out[k].end()) continue;
    out[k].push_back(i);
    ++taken;
  }
  return out;
}

// grad_check over `count` sampled parameter elements.
inline GradCheckResult grad_check_sampled(const std::function<Tensor<double>()>& loss_fn,
                                          const std::vector<Tensor<double>>& params, std::size_t count,
                                          double h = 1e-5, double floor = 1e-8, std::uint64_t seed = 17) {
  const auto idx = sample_indices(params, count, seed);
  std::vector<Tensor<double>> picked;
  std::vector<std::vector<std::size_t>> picked_idx;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (idx[k].empty()) continue;
    picked.push_back(params[k]);
    picked_idx.push_back(idx[k]);
  }
  return grad_check(loss_fn, picked, picked_idx, h, floor);
}

}  // namespace litefs::testing
