#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "litefs/tape.hpp"
#include "litefs/tensor.hpp"

namespace litefs {

// Differentiable tensor operations. Every op validates shapes, computes its
// output eagerly and, when a tape is active and an input requires grad,
// records its backward rule. Non-finite outputs raise NumericError.

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride, int padding);

// Output extent floor((in + 2p - k) / stride) + 1; ConfigError when empty.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding);

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

enum class Pointwise { leaky_relu, tanh, sigmoid };

template <typename T>
Tensor<T> pointwise(const Tensor<T>& input, Pointwise kind, double slope = 0.2);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope = 0.2) { return pointwise(x, Pointwise::leaky_relu, slope); }
template <typename T>
Tensor<T> relu(const Tensor<T>& x) { return pointwise(x, Pointwise::leaky_relu, 0.0); }
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) { return pointwise(x, Pointwise::tanh); }
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) { return pointwise(x, Pointwise::sigmoid); }

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset);
template <typename T>
Tensor<T> abs(const Tensor<T>& a);
template <typename T>
Tensor<T> square(const Tensor<T>& a);

// Full reductions to a one-element tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

// [B, ...] -> [B]: mean over all non-batch elements of each sample.
template <typename T>
Tensor<T> sample_means(const Tensor<T>& a);
// [B] -> scalar: sum_b weights[b] * a[b].
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights);

// Running (accumulated) per-channel statistics, updated with momentum when a
// training-mode channel_stats call is given a pointer to them.
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
  double momentum = 0.1;

  explicit RunningStats(std::int64_t channels = 0, double momentum_ = 0.1)
      : mean(Shape{channels > 0 ? channels : 1}, T{0}), var(Shape{channels > 0 ? channels : 1}, T{1}),
        momentum(momentum_) {}
};

template <typename T>
struct ChannelStats {
  Tensor<T> mean;  // [C]
  Tensor<T> std;   // [C], sqrt(var + eps)
};

// Per-channel population mean and epsilon-floored std over batch and space of
// a [B,C,H,W] tensor. When `running` is given, its statistics are blended in.
template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& input, double eps = 1e-5, RunningStats<T>* running = nullptr);

// Stats taken from accumulated running values instead of the batch.
template <typename T>
ChannelStats<T> running_channel_stats(const RunningStats<T>& running, double eps = 1e-5);

// (x - mean[c]) / std[c] for [B,C,H,W] x.
template <typename T>
Tensor<T> normalize_channels(const Tensor<T>& input, const Tensor<T>& mean, const Tensor<T>& std);

// x[b,c,h,w] * scale[b,c] + shift[b,c].
template <typename T>
Tensor<T> modulate_channels(const Tensor<T>& input, const Tensor<T>& scale, const Tensor<T>& shift);

enum class Resample { up2_nearest, down2_stride };

// up2_nearest doubles H and W by replication. down2_stride only validates that
// a stride-2 convolution can halve the map exactly and returns the input.
template <typename T>
Tensor<T> resample(const Tensor<T>& input, Resample mode);

// 2x2 average pooling (area downsample by two).
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& input);

// Bilinear resize with half-pixel centres and edge clamping.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w);

// Row-wise L2 normalization of a [B,D] tensor.
template <typename T>
Tensor<T> normalize_rows(const Tensor<T>& input, double eps = 1e-12);

// Row-wise dot products of two [B,D] tensors -> [B].
template <typename T>
Tensor<T> row_dot(const Tensor<T>& a, const Tensor<T>& b);

// Throws NumericError naming `op` if any value is NaN or infinite.
template <typename T>
void require_finite(const Tensor<T>& t, const char* op);

}  // namespace litefs
