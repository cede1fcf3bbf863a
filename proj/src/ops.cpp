#include "litefs/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>

namespace litefs {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(const char* op, std::initializer_list<Tensor<T>*> outputs, std::function<void()> backward) {
  std::vector<Tensor<T>> handles;
  for (auto* out : outputs) {
    out->mark_intermediate();
    handles.push_back(*out);
  }
  active_tape()->record(op, std::move(backward), [handles]() mutable {
    for (auto& h : handles) h.clear_grad();
  });
}

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(shape));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

struct ConvGeometry {
  std::int64_t channels, height, width, kh, kw, out_h, out_w;
  int stride, pad;
  std::int64_t rows() const { return channels * kh * kw; }
  std::int64_t cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::int64_t cols = g.cols();
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const T* plane = x + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = plane + iy * g.width;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::int64_t cols = g.cols();
  for (std::int64_t c = 0; c < g.channels; ++c) {
    T* plane = dx + c * g.height * g.width;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* dst = plane + iy * g.width;
          const T* src = row + oy * g.out_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise_conv(const ConvGeometry& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding) {
  if (stride < 1 || padding < 0 || kernel < 1) {
    throw ConfigError("conv2d: invalid stride/padding/kernel");
  }
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0) {
    throw ConfigError("conv2d: kernel " + std::to_string(kernel) + " does not fit padded extent " +
                      std::to_string(in + 2 * padding) + "; output would be empty");
  }
  // Windows that would start past the padded border are dropped (floor).
  return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride, int padding) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  require_rank(bias.shape(), 1, "conv2d bias");
  const std::int64_t batch = input.dim(0);
  const std::int64_t cout = kernel.dim(0);
  if (kernel.dim(1) != input.dim(1)) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " +
                         std::to_string(input.dim(1)));
  }
  if (bias.dim(0) != cout) throw DimensionError("conv2d: bias length does not match output channels");

  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernel.dim(2), kernel.dim(3), 0, 0, stride, padding};
  g.out_h = conv_out_extent(g.height, g.kh, stride, padding);
  g.out_w = conv_out_extent(g.width, g.kw, stride, padding);

  Tensor<T> out(Shape{batch, cout, g.out_h, g.out_w});
  const std::int64_t in_plane = g.channels * g.height * g.width;
  const std::int64_t out_plane = cout * g.cols();
  const bool direct = is_pointwise_conv(g);
  AlignedVector<T> col(direct ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));

  Eigen::Map<const RowMat<T>> w(kernel.values().data(), cout, g.rows());
  Eigen::Map<const Vec<T>> b(bias.values().data(), cout);
  for (std::int64_t n = 0; n < batch; ++n) {
    const T* x = input.values().data() + n * in_plane;
    if (!direct) im2col(x, g, col.data());
    Eigen::Map<const RowMat<T>> cm(direct ? x : col.data(), g.rows(), g.cols());
    Eigen::Map<RowMat<T>> y(out.mutable_values().data() + n * out_plane, cout, g.cols());
    y.noalias() = w * cm;
    y.colwise() += b;
  }
  require_finite(out, "conv2d");

  if (should_record({&input, &kernel, &bias})) {
    record<T>("conv2d", {&out}, [input, kernel, bias, out, g, batch, cout, in_plane, out_plane, direct]() mutable {
      if (!out.grad_allocated()) return;
      const T* gy = out.grad().data();
      AlignedVector<T> col(direct ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
      AlignedVector<T> dcol(direct ? 0 : static_cast<std::size_t>(g.rows() * g.cols()));
      Eigen::Map<const RowMat<T>> w(kernel.values().data(), cout, g.rows());
      for (std::int64_t n = 0; n < batch; ++n) {
        Eigen::Map<const RowMat<T>> dy(gy + n * out_plane, cout, g.cols());
        const T* x = input.values().data() + n * in_plane;
        if (kernel.requires_grad()) {
          if (!direct) im2col(x, g, col.data());
          Eigen::Map<const RowMat<T>> cm(direct ? x : col.data(), g.rows(), g.cols());
          Eigen::Map<RowMat<T>> dw(kernel.mutable_grad().data(), cout, g.rows());
          dw.noalias() += dy * cm.transpose();
        }
        if (bias.requires_grad()) {
          Eigen::Map<Vec<T>> db(bias.mutable_grad().data(), cout);
          db += dy.rowwise().sum();
        }
        if (input.requires_grad()) {
          T* dx = input.mutable_grad().data() + n * in_plane;
          if (direct) {
            Eigen::Map<RowMat<T>> dxm(dx, g.rows(), g.cols());
            dxm.noalias() += w.transpose() * dy;
          } else {
            Eigen::Map<RowMat<T>> dc(dcol.data(), g.rows(), g.cols());
            dc.noalias() = w.transpose() * dy;
            col2im_add(dcol.data(), g, dx);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "fully_connected input");
  require_rank(weight.shape(), 2, "fully_connected weight");
  require_rank(bias.shape(), 1, "fully_connected bias");
  const std::int64_t batch = input.dim(0), din = input.dim(1), dout = weight.dim(0);
  if (weight.dim(1) != din) {
    throw DimensionError("fully_connected: weight expects " + std::to_string(weight.dim(1)) + " inputs, got " +
                         std::to_string(din));
  }
  if (bias.dim(0) != dout) throw DimensionError("fully_connected: bias length does not match outputs");

  Tensor<T> out(Shape{batch, dout});
  Eigen::Map<const RowMat<T>> x(input.values().data(), batch, din);
  Eigen::Map<const RowMat<T>> w(weight.values().data(), dout, din);
  Eigen::Map<const Vec<T>> b(bias.values().data(), dout);
  Eigen::Map<RowMat<T>> y(out.mutable_values().data(), batch, dout);
  y.noalias() = x * w.transpose();
  y.rowwise() += b.transpose();
  require_finite(out, "fully_connected");

  if (should_record({&input, &weight, &bias})) {
    record<T>("fully_connected", {&out}, [input, weight, bias, out, batch, din, dout]() mutable {
      if (!out.grad_allocated()) return;
      Eigen::Map<const RowMat<T>> dy(out.grad().data(), batch, dout);
      if (input.requires_grad()) {
        Eigen::Map<const RowMat<T>> w(weight.values().data(), dout, din);
        Eigen::Map<RowMat<T>> dx(input.mutable_grad().data(), batch, din);
        dx.noalias() += dy * w;
      }
      if (weight.requires_grad()) {
        Eigen::Map<const RowMat<T>> x(input.values().data(), batch, din);
        Eigen::Map<RowMat<T>> dw(weight.mutable_grad().data(), dout, din);
        dw.noalias() += dy.transpose() * x;
      }
      if (bias.requires_grad()) {
        Eigen::Map<Vec<T>> db(bias.mutable_grad().data(), dout);
        db += dy.colwise().sum().transpose();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> pointwise(const Tensor<T>& input, Pointwise kind, double slope) {
  Tensor<T> out(input.shape());
  const auto x = input.values();
  auto y = out.mutable_values();
  const T s = static_cast<T>(slope);
  switch (kind) {
    case Pointwise::leaky_relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : s * x[i];
      break;
    case Pointwise::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case Pointwise::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= T{0}) {
          y[i] = T{1} / (T{1} + std::exp(-x[i]));
        } else {
          const T e = std::exp(x[i]);
          y[i] = e / (T{1} + e);
        }
      }
      break;
  }
  require_finite(out, "pointwise");

  if (should_record({&input})) {
    record<T>("pointwise", {&out}, [input, out, kind, s]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto x = input.values();
      const auto y = out.values();
      auto gx = input.mutable_grad();
      switch (kind) {
        case Pointwise::leaky_relu:
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += x[i] > T{0} ? gy[i] : s * gy[i];
          break;
        case Pointwise::tanh:
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (T{1} - y[i] * y[i]);
          break;
        case Pointwise::sigmoid:
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * y[i] * (T{1} - y[i]);
          break;
      }
    });
  }
  return out;
}

namespace {

// Shared body for same-shape binary ops; da/db give d(out)/d(a), d(out)/d(b).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  require_same_shape(a, b, op);
  Tensor<T> out(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(av[i], bv[i]);
  require_finite(out, op);
  if (should_record({&a, &b})) {
    record<T>(op, {&out}, [a, b, out, da, db]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto av = a.values();
      const auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * da(av[i], bv[i]);
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * db(av[i], bv[i]);
      }
    });
  }
  return out;
}

template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& a, F f, D d) {
  Tensor<T> out(a.shape());
  const auto av = a.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(av[i]);
  require_finite(out, op);
  if (should_record({&a})) {
    record<T>(op, {&out}, [a, out, d]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto av = a.values();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * d(av[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; }, [](T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      "scale", a, [factor](T x) { return x * factor; }, [factor](T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary<T>(
      "add_scalar", a, [offset](T x) { return x + offset; }, [](T) { return T{1}; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary<T>(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary<T>(
      "square", a, [](T x) { return x * x; }, [](T x) { return T{2} * x; });
}

namespace {

template <typename T>
Tensor<T> scaled_sum(const char* op, const Tensor<T>& a, T factor) {
  Tensor<T> out(Shape{1});
  T acc{0};
  for (T v : a.values()) acc += v;
  out.mutable_values()[0] = acc * factor;
  require_finite(out, op);
  if (should_record({&a})) {
    record<T>(op, {&out}, [a, out, factor]() mutable {
      if (!out.grad_allocated()) return;
      const T g = out.grad()[0] * factor;
      for (auto& v : a.mutable_grad()) v += g;
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  return scaled_sum<T>("sum", a, T{1});
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scaled_sum<T>("mean", a, T{1} / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> sample_means(const Tensor<T>& a) {
  if (a.rank() < 2) throw DimensionError("sample_means needs a batched tensor, got " + shape_string(a.shape()));
  const std::int64_t batch = a.dim(0);
  const std::int64_t per = a.numel() / batch;
  Tensor<T> out(Shape{batch});
  const auto x = a.values();
  for (std::int64_t b = 0; b < batch; ++b) {
    T acc{0};
    for (std::int64_t i = 0; i < per; ++i) acc += x[b * per + i];
    out.mutable_values()[b] = acc / static_cast<T>(per);
  }
  require_finite(out, "sample_means");
  if (should_record({&a})) {
    record<T>("sample_means", {&out}, [a, out, batch, per]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      auto gx = a.mutable_grad();
      for (std::int64_t b = 0; b < batch; ++b) {
        const T g = gy[b] / static_cast<T>(per);
        for (std::int64_t i = 0; i < per; ++i) gx[b * per + i] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& a, std::span<const T> weights) {
  require_rank(a.shape(), 1, "weighted_sum");
  if (static_cast<std::int64_t>(weights.size()) != a.dim(0)) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(a.dim(0)) + " values");
  }
  Tensor<T> out(Shape{1});
  T acc{0};
  const auto x = a.values();
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * x[i];
  out.mutable_values()[0] = acc;
  require_finite(out, "weighted_sum");
  if (should_record({&a})) {
    std::vector<T> w(weights.begin(), weights.end());
    record<T>("weighted_sum", {&out}, [a, out, w]() mutable {
      if (!out.grad_allocated()) return;
      const T g = out.grad()[0];
      auto gx = a.mutable_grad();
      for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
    });
  }
  return out;
}

template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& input, double eps, RunningStats<T>* running) {
  require_rank(input.shape(), 4, "channel_stats");
  const std::int64_t batch = input.dim(0), channels = input.dim(1);
  const std::int64_t plane = input.dim(2) * input.dim(3);
  const std::int64_t count = batch * plane;
  if (count < 2) {
    throw DimensionError("channel_stats: need at least two values per channel, got " + shape_string(input.shape()));
  }
  ChannelStats<T> st{Tensor<T>(Shape{channels}), Tensor<T>(Shape{channels})};
  std::vector<T> var(static_cast<std::size_t>(channels));
  const auto x = input.values();
  for (std::int64_t c = 0; c < channels; ++c) {
    T acc{0};
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* p = x.data() + (b * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
    }
    const T m = acc / static_cast<T>(count);
    T sq{0};
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* p = x.data() + (b * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
    }
    var[c] = sq / static_cast<T>(count);
    st.mean.mutable_values()[c] = m;
    st.std.mutable_values()[c] = std::sqrt(var[c] + static_cast<T>(eps));
  }
  require_finite(st.std, "channel_stats");

  if (running != nullptr) {
    if (running->mean.numel() != channels) throw DimensionError("channel_stats: running stats channel mismatch");
    const T mom = static_cast<T>(running->momentum);
    auto rm = running->mean.mutable_values();
    auto rv = running->var.mutable_values();
    for (std::int64_t c = 0; c < channels; ++c) {
      rm[c] = (T{1} - mom) * rm[c] + mom * st.mean.values()[c];
      rv[c] = (T{1} - mom) * rv[c] + mom * var[c];
    }
  }

  if (should_record({&input})) {
    Tensor<T> mean_out = st.mean;
    Tensor<T> std_out = st.std;
    record<T>("channel_stats", {&st.mean, &st.std},
              [input, mean_out, std_out, batch, channels, plane, count]() mutable {
                const bool gm = mean_out.grad_allocated();
                const bool gs = std_out.grad_allocated();
                if (!gm && !gs) return;
                const auto x = input.values();
                auto gx = input.mutable_grad();
                const T n = static_cast<T>(count);
                for (std::int64_t c = 0; c < channels; ++c) {
                  const T m = mean_out.values()[c];
                  const T s = std_out.values()[c];
                  const T gmean = gm ? mean_out.grad()[c] / n : T{0};
                  const T gstd = gs ? std_out.grad()[c] / (n * s) : T{0};
                  for (std::int64_t b = 0; b < batch; ++b) {
                    const std::int64_t off = (b * channels + c) * plane;
                    for (std::int64_t i = 0; i < plane; ++i) gx[off + i] += gmean + gstd * (x[off + i] - m);
                  }
                }
              });
  }
  return st;
}

template <typename T>
ChannelStats<T> running_channel_stats(const RunningStats<T>& running, double eps) {
  ChannelStats<T> st{running.mean.detach(), running.var.detach()};
  for (auto& v : st.std.mutable_values()) v = std::sqrt(v + static_cast<T>(eps));
  return st;
}

template <typename T>
Tensor<T> normalize_channels(const Tensor<T>& input, const Tensor<T>& mean, const Tensor<T>& std) {
  require_rank(input.shape(), 4, "normalize_channels");
  const std::int64_t batch = input.dim(0), channels = input.dim(1);
  const std::int64_t plane = input.dim(2) * input.dim(3);
  if (mean.numel() != channels || std.numel() != channels) {
    throw DimensionError("normalize_channels: statistics do not match channel count");
  }
  Tensor<T> out(input.shape());
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      const T m = mean.values()[c];
      const T inv = T{1} / std.values()[c];
      const std::int64_t off = (b * channels + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) y[off + i] = (x[off + i] - m) * inv;
    }
  }
  require_finite(out, "normalize_channels");
  if (should_record({&input, &mean, &std})) {
    record<T>("normalize_channels", {&out}, [input, mean, std, out, batch, channels, plane]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto x = input.values();
      for (std::int64_t c = 0; c < channels; ++c) {
        const T m = mean.values()[c];
        const T s = std.values()[c];
        const T inv = T{1} / s;
        T gsum{0}, gxsum{0};
        for (std::int64_t b = 0; b < batch; ++b) {
          const std::int64_t off = (b * channels + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) {
            gsum += gy[off + i];
            gxsum += gy[off + i] * (x[off + i] - m);
          }
          if (input.requires_grad()) {
            auto gx = input.mutable_grad();
            for (std::int64_t i = 0; i < plane; ++i) gx[off + i] += gy[off + i] * inv;
          }
        }
        if (mean.requires_grad()) mean.mutable_grad()[c] -= gsum * inv;
        if (std.requires_grad()) std.mutable_grad()[c] -= gxsum * inv * inv;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> modulate_channels(const Tensor<T>& input, const Tensor<T>& scale_bc, const Tensor<T>& shift_bc) {
  require_rank(input.shape(), 4, "modulate_channels");
  const std::int64_t batch = input.dim(0), channels = input.dim(1);
  const std::int64_t plane = input.dim(2) * input.dim(3);
  const Shape bc{batch, channels};
  if (scale_bc.shape() != bc || shift_bc.shape() != bc) {
    throw DimensionError("modulate_channels: expected scale/shift of shape " + shape_string(bc));
  }
  Tensor<T> out(input.shape());
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t bcx = 0; bcx < batch * channels; ++bcx) {
    const T a = scale_bc.values()[bcx];
    const T s = shift_bc.values()[bcx];
    for (std::int64_t i = 0; i < plane; ++i) y[bcx * plane + i] = x[bcx * plane + i] * a + s;
  }
  require_finite(out, "modulate_channels");
  if (should_record({&input, &scale_bc, &shift_bc})) {
    record<T>("modulate_channels", {&out}, [input, scale_bc, shift_bc, out, batch, channels, plane]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto x = input.values();
      for (std::int64_t bcx = 0; bcx < batch * channels; ++bcx) {
        const T a = scale_bc.values()[bcx];
        T gsum{0}, gxsum{0};
        for (std::int64_t i = 0; i < plane; ++i) {
          gsum += gy[bcx * plane + i];
          gxsum += gy[bcx * plane + i] * x[bcx * plane + i];
        }
        if (input.requires_grad()) {
          auto gx = input.mutable_grad();
          for (std::int64_t i = 0; i < plane; ++i) gx[bcx * plane + i] += gy[bcx * plane + i] * a;
        }
        if (scale_bc.requires_grad()) scale_bc.mutable_grad()[bcx] += gxsum;
        if (shift_bc.requires_grad()) shift_bc.mutable_grad()[bcx] += gsum;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> resample(const Tensor<T>& input, Resample mode) {
  require_rank(input.shape(), 4, "resample");
  const std::int64_t h = input.dim(2), w = input.dim(3);
  if (mode == Resample::down2_stride) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw ConfigError("resample: down2 needs even extents, got " + shape_string(input.shape()));
    }
    return input;
  }
  const std::int64_t planes = input.dim(0) * input.dim(1);
  Tensor<T> out(Shape{input.dim(0), input.dim(1), 2 * h, 2 * w});
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t i = 0; i < 2 * h; ++i) {
      const T* src = x.data() + p * h * w + (i / 2) * w;
      T* dst = y.data() + p * 4 * h * w + i * 2 * w;
      for (std::int64_t j = 0; j < 2 * w; ++j) dst[j] = src[j / 2];
    }
  }
  if (should_record({&input})) {
    record<T>("up2_nearest", {&out}, [input, out, planes, h, w]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      auto gx = input.mutable_grad();
      for (std::int64_t p = 0; p < planes; ++p) {
        for (std::int64_t i = 0; i < 2 * h; ++i) {
          T* dst = gx.data() + p * h * w + (i / 2) * w;
          const T* src = gy.data() + p * 4 * h * w + i * 2 * w;
          for (std::int64_t j = 0; j < 2 * w; ++j) dst[j / 2] += src[j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "avg_pool2");
  const std::int64_t h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ConfigError("avg_pool2 needs even extents, got " + shape_string(input.shape()));
  const std::int64_t planes = input.dim(0) * input.dim(1);
  const std::int64_t oh = h / 2, ow = w / 2;
  Tensor<T> out(Shape{input.dim(0), input.dim(1), oh, ow});
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * oh * ow;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        const T* q = src + 2 * i * w + 2 * j;
        dst[i * ow + j] = (q[0] + q[1] + q[w] + q[w + 1]) * T{0.25};
      }
    }
  }
  if (should_record({&input})) {
    record<T>("avg_pool2", {&out}, [input, out, planes, h, w, oh, ow]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      auto gx = input.mutable_grad();
      for (std::int64_t p = 0; p < planes; ++p) {
        T* dst = gx.data() + p * h * w;
        const T* src = gy.data() + p * oh * ow;
        for (std::int64_t i = 0; i < oh; ++i) {
          for (std::int64_t j = 0; j < ow; ++j) {
            const T g = src[i * ow + j] * T{0.25};
            T* q = dst + 2 * i * w + 2 * j;
            q[0] += g;
            q[1] += g;
            q[w] += g;
            q[w + 1] += g;
          }
        }
      }
    });
  }
  return out;
}

namespace {

struct LinearTap {
  std::int64_t i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<LinearTap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::int64_t>(std::floor(src));
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = LinearTap{i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& input, std::int64_t out_h, std::int64_t out_w) {
  require_rank(input.shape(), 4, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw DimensionError("resize_bilinear: empty output size");
  const std::int64_t h = input.dim(2), w = input.dim(3);
  if (h == out_h && w == out_w) return input;
  const std::int64_t planes = input.dim(0) * input.dim(1);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor<T> out(Shape{input.dim(0), input.dim(1), out_h, out_w});
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * out_h * out_w;
    for (std::int64_t i = 0; i < out_h; ++i) {
      const auto& a = ty[i];
      const T wy1 = static_cast<T>(a.w1), wy0 = T{1} - wy1;
      for (std::int64_t j = 0; j < out_w; ++j) {
        const auto& b = tx[j];
        const T wx1 = static_cast<T>(b.w1), wx0 = T{1} - wx1;
        dst[i * out_w + j] = wy0 * (wx0 * src[a.i0 * w + b.i0] + wx1 * src[a.i0 * w + b.i1]) +
                             wy1 * (wx0 * src[a.i1 * w + b.i0] + wx1 * src[a.i1 * w + b.i1]);
      }
    }
  }
  if (should_record({&input})) {
    record<T>("resize_bilinear", {&out}, [input, out, planes, h, w, out_h, out_w, ty, tx]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      auto gx = input.mutable_grad();
      for (std::int64_t p = 0; p < planes; ++p) {
        T* dst = gx.data() + p * h * w;
        const T* src = gy.data() + p * out_h * out_w;
        for (std::int64_t i = 0; i < out_h; ++i) {
          const auto& a = ty[i];
          const T wy1 = static_cast<T>(a.w1), wy0 = T{1} - wy1;
          for (std::int64_t j = 0; j < out_w; ++j) {
            const auto& b = tx[j];
            const T wx1 = static_cast<T>(b.w1), wx0 = T{1} - wx1;
            const T g = src[i * out_w + j];
            dst[a.i0 * w + b.i0] += g * wy0 * wx0;
            dst[a.i0 * w + b.i1] += g * wy0 * wx1;
            dst[a.i1 * w + b.i0] += g * wy1 * wx0;
            dst[a.i1 * w + b.i1] += g * wy1 * wx1;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> normalize_rows(const Tensor<T>& input, double eps) {
  require_rank(input.shape(), 2, "normalize_rows");
  const std::int64_t rows = input.dim(0), cols = input.dim(1);
  Tensor<T> out(input.shape());
  std::vector<T> norms(static_cast<std::size_t>(rows));
  const auto x = input.values();
  auto y = out.mutable_values();
  for (std::int64_t r = 0; r < rows; ++r) {
    T sq{0};
    for (std::int64_t c = 0; c < cols; ++c) sq += x[r * cols + c] * x[r * cols + c];
    norms[r] = std::sqrt(sq + static_cast<T>(eps));
    for (std::int64_t c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] / norms[r];
  }
  require_finite(out, "normalize_rows");
  if (should_record({&input})) {
    record<T>("normalize_rows", {&out}, [input, out, rows, cols, norms]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      const auto y = out.values();
      auto gx = input.mutable_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        T dot{0};
        for (std::int64_t c = 0; c < cols; ++c) dot += gy[r * cols + c] * y[r * cols + c];
        for (std::int64_t c = 0; c < cols; ++c) {
          gx[r * cols + c] += (gy[r * cols + c] - y[r * cols + c] * dot) / norms[r];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> row_dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "row_dot");
  require_same_shape(a, b, "row_dot");
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  Tensor<T> out(Shape{rows});
  for (std::int64_t r = 0; r < rows; ++r) {
    T acc{0};
    for (std::int64_t c = 0; c < cols; ++c) acc += a.values()[r * cols + c] * b.values()[r * cols + c];
    out.mutable_values()[r] = acc;
  }
  require_finite(out, "row_dot");
  if (should_record({&a, &b})) {
    record<T>("row_dot", {&out}, [a, b, out, rows, cols]() mutable {
      if (!out.grad_allocated()) return;
      const auto gy = out.grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          if (a.requires_grad()) a.mutable_grad()[r * cols + c] += gy[r] * b.values()[r * cols + c];
          if (b.requires_grad()) b.mutable_grad()[r * cols + c] += gy[r] * a.values()[r * cols + c];
        }
      }
    });
  }
  return out;
}

#define LITEFS_INSTANTIATE_OPS(T)                                                                      \
  template void require_finite<T>(const Tensor<T>&, const char*);                                     \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);        \
  template Tensor<T> fully_connected<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> pointwise<T>(const Tensor<T>&, Pointwise, double);                              \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                   \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                              \
  template Tensor<T> abs<T>(const Tensor<T>&);                                                        \
  template Tensor<T> square<T>(const Tensor<T>&);                                                     \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                        \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                       \
  template Tensor<T> sample_means<T>(const Tensor<T>&);                                               \
  template Tensor<T> weighted_sum<T>(const Tensor<T>&, std::span<const T>);                           \
  template ChannelStats<T> channel_stats<T>(const Tensor<T>&, double, RunningStats<T>*);              \
  template ChannelStats<T> running_channel_stats<T>(const RunningStats<T>&, double);                  \
  template Tensor<T> normalize_channels<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> modulate_channels<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> resample<T>(const Tensor<T>&, Resample);                                         \
  template Tensor<T> avg_pool2<T>(const Tensor<T>&);                                                  \
  template Tensor<T> resize_bilinear<T>(const Tensor<T>&, std::int64_t, std::int64_t);                \
  template Tensor<T> normalize_rows<T>(const Tensor<T>&, double);                                     \
  template Tensor<T> row_dot<T>(const Tensor<T>&, const Tensor<T>&);

LITEFS_INSTANTIATE_OPS(float)
LITEFS_INSTANTIATE_OPS(double)

}  // namespace litefs
