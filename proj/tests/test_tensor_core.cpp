#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "litefs/adam.hpp"
#include "litefs/ops.hpp"

using namespace litefs;
using litefs::testing::grad_check;
using litefs::testing::probe_loss;
using litefs::testing::random_tensor;

TEST_CASE("conv2d scalar kernel scales the input") {
  Tensor<float> x(Shape{1, 1, 3, 3}, 1.0f);
  Tensor<float> k(Shape{1, 1, 1, 1}, 2.0f);
  Tensor<float> b(Shape{1}, 0.0f);
  auto y = conv2d(x, k, b, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (float v : y.values()) CHECK(v == 2.0f);
}

TEST_CASE("conv2d with unit 1x1 kernel is an exact identity") {
  auto x = random_tensor<float>(Shape{2, 3, 5, 4}, 1);
  Tensor<float> k(Shape{3, 3, 1, 1}, 0.0f);
  for (int c = 0; c < 3; ++c) k.mutable_values()[c * 3 + c] = 1.0f;
  Tensor<float> b(Shape{3}, 0.0f);
  auto y = conv2d(x, k, b, 1, 0);
  for (std::size_t i = 0; i < y.values().size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("conv2d errors") {
  Tensor<float> x(Shape{1, 2, 5, 5});
  Tensor<float> k(Shape{4, 3, 3, 3});
  Tensor<float> b(Shape{4});
  CHECK_THROWS_AS(conv2d(x, k, b, 1, 1), DimensionError);
  Tensor<float> k7(Shape{4, 2, 7, 7});
  CHECK_THROWS_AS(conv2d(x, k7, b, 1, 0), ConfigError);
  CHECK(conv_out_extent(8, 3, 2, 1) == 4);
  CHECK(conv_out_extent(8, 4, 2, 1) == 4);
}

TEST_CASE("conv2d gradients match central differences") {
  auto x = random_tensor<double>(Shape{2, 4, 8, 8}, 2);
  auto k = random_tensor<double>(Shape{8, 4, 3, 3}, 3);
  auto b = random_tensor<double>(Shape{8}, 4);
  auto y = conv2d(x, k, b, 2, 1);
  CHECK(y.shape() == Shape{2, 8, 4, 4});
  auto r = grad_check([&] { return probe_loss(conv2d(x, k, b, 2, 1)); }, {x, k, b});
  CHECK(r.max_rel_error < 1e-4);

  auto k4 = random_tensor<double>(Shape{3, 4, 4, 4}, 5);
  auto b4 = random_tensor<double>(Shape{3}, 6);
  auto r4 = grad_check([&] { return probe_loss(conv2d(x, k4, b4, 1, 2)); }, {x, k4, b4});
  CHECK(r4.max_rel_error < 1e-4);
}

TEST_CASE("fully_connected") {
  Tensor<float> x(Shape{1, 2}, std::vector<float>{1, 2});
  Tensor<float> w(Shape{2, 2}, std::vector<float>{1, 1, 1, -1});
  Tensor<float> b(Shape{2}, 0.0f);
  auto y = fully_connected(x, w, b);
  CHECK(y.values()[0] == 3.0f);
  CHECK(y.values()[1] == -1.0f);

  Tensor<float> eye(Shape{2, 2}, std::vector<float>{1, 0, 0, 1});
  auto same = fully_connected(x, eye, b);
  CHECK(same.values()[0] == 1.0f);
  CHECK(same.values()[1] == 2.0f);

  Tensor<float> bad(Shape{2, 3});
  CHECK_THROWS_AS(fully_connected(x, bad, b), DimensionError);

  auto xd = random_tensor<double>(Shape{4, 512}, 7);
  auto wd = random_tensor<double>(Shape{64, 512}, 8, -0.05, 0.05);
  auto bd = random_tensor<double>(Shape{64}, 9);
  auto r = grad_check([&] { return probe_loss(fully_connected(xd, wd, bd)); }, {xd, wd, bd},
                      {{0, 1, 100, 2047}, {0, 5, 511, 32767}, {}});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("pointwise values and gradients") {
  Tensor<float> z(Shape{1}, 0.0f);
  CHECK(tanh(z).item() == 0.0f);
  CHECK(sigmoid(z).item() == 0.5f);
  Tensor<float> m(Shape{1}, -1.0f);
  CHECK(leaky_relu(m, 0.2).item() == doctest::Approx(-0.2f));

  auto x = random_tensor<double>(Shape{3, 7}, 10, -3, 3);
  for (auto kind : {Pointwise::leaky_relu, Pointwise::tanh, Pointwise::sigmoid}) {
    auto r = grad_check([&] { return probe_loss(pointwise(x, kind, 0.2)); }, {x});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("channel_stats") {
  Tensor<double> c(Shape{2, 1, 2, 2}, 3.0);
  auto s = channel_stats(c, 1e-5);
  CHECK(s.mean.item() == doctest::Approx(3.0));
  CHECK(s.std.item() == doctest::Approx(std::sqrt(1e-5)));

  Tensor<double> two(Shape{1, 1, 1, 2}, std::vector<double>{0, 2});
  auto s2 = channel_stats(two, 0.0);
  CHECK(s2.mean.item() == 1.0);
  CHECK(s2.std.item() == 1.0);

  // Direct two-pass oracle.
  auto x = random_tensor<double>(Shape{3, 4, 5, 6}, 11, -2, 5);
  auto st = channel_stats(x, 1e-5);
  for (int ch = 0; ch < 4; ++ch) {
    double m = 0;
    int n = 0;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 30; ++i) {
        m += x.values()[(b * 4 + ch) * 30 + i];
        ++n;
      }
    m /= n;
    double v = 0;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 30; ++i) v += std::pow(x.values()[(b * 4 + ch) * 30 + i] - m, 2);
    v /= n;
    CHECK(std::abs(st.mean.values()[ch] - m) < 1e-6);
    CHECK(std::abs(st.std.values()[ch] - std::sqrt(v + 1e-5)) < 1e-6);
  }

  // Normalized tensors come back with zero mean and unit std.
  auto norm = normalize_channels(x, st.mean, st.std);
  auto again = channel_stats(norm, 0.0);
  for (int ch = 0; ch < 4; ++ch) {
    CHECK(std::abs(again.mean.values()[ch]) < 1e-6);
    CHECK(std::abs(again.std.values()[ch] - 1.0) < 1e-5);
  }

  Tensor<double> single(Shape{1, 2, 1, 1});
  CHECK_THROWS_AS(channel_stats(single), DimensionError);
}

TEST_CASE("channel_stats running update uses momentum") {
  Tensor<double> x(Shape{1, 1, 1, 2}, std::vector<double>{0, 2});
  RunningStats<double> rs(1, 0.1);
  channel_stats(x, 1e-5, &rs);
  CHECK(rs.mean.item() == doctest::Approx(0.1));
  CHECK(rs.var.item() == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));
}

TEST_CASE("channel_stats and normalization gradients") {
  auto x = random_tensor<double>(Shape{2, 3, 4, 4}, 12);
  auto r = grad_check(
      [&] {
        auto s = channel_stats(x, 1e-5);
        return probe_loss(normalize_channels(x, s.mean, s.std));
      },
      {x});
  CHECK(r.max_rel_error < 1e-4);

  auto a = random_tensor<double>(Shape{2, 3}, 13);
  auto sh = random_tensor<double>(Shape{2, 3}, 14);
  auto r2 = grad_check([&] { return probe_loss(modulate_channels(x, a, sh)); }, {x, a, sh});
  CHECK(r2.max_rel_error < 1e-4);
}

TEST_CASE("resample") {
  Tensor<float> one(Shape{1, 1, 1, 1}, 5.0f);
  auto up = resample(one, Resample::up2_nearest);
  CHECK(up.shape() == Shape{1, 1, 2, 2});
  for (float v : up.values()) CHECK(v == 5.0f);

  auto x = random_tensor<double>(Shape{2, 3, 3, 5}, 15);
  auto back = avg_pool2(resample(x, Resample::up2_nearest));
  for (std::size_t i = 0; i < x.values().size(); ++i) CHECK(back.values()[i] == doctest::Approx(x.values()[i]));

  auto r = grad_check([&] { return probe_loss(resample(x, Resample::up2_nearest)); }, {x});
  CHECK(r.max_rel_error < 1e-4);

  Tensor<float> odd(Shape{1, 1, 3, 4});
  CHECK_THROWS_AS(resample(odd, Resample::down2_stride), ConfigError);
  Tensor<float> even(Shape{1, 1, 4, 4});
  CHECK(resample(even, Resample::down2_stride).shares_storage(even));
}

TEST_CASE("pooling, resizing and row ops have matching gradients") {
  auto x = random_tensor<double>(Shape{2, 2, 6, 8}, 16);
  CHECK(grad_check([&] { return probe_loss(avg_pool2(x)); }, {x}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return probe_loss(resize_bilinear(x, 5, 11)); }, {x}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return probe_loss(resize_bilinear(x, 3, 4)); }, {x}).max_rel_error < 1e-4);

  auto a = random_tensor<double>(Shape{3, 6}, 17);
  auto b = random_tensor<double>(Shape{3, 6}, 18);
  CHECK(grad_check([&] { return probe_loss(normalize_rows(a)); }, {a}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return probe_loss(row_dot(a, b)); }, {a, b}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return probe_loss(mul(a, b)); }, {a, b}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return probe_loss(sub(square(a), b)); }, {a, b}).max_rel_error < 1e-4);
  CHECK(grad_check([&] { return mean(abs(add_scalar(scale(a, 3.0), 0.1))); }, {a}).max_rel_error < 1e-4);
  std::vector<double> w{0.5, -1.0, 2.0};
  CHECK(grad_check([&] { return weighted_sum(sample_means(a), std::span<const double>(w)); }, {a}).max_rel_error <
        1e-4);
}

TEST_CASE("reverse_accumulate basics") {
  Tensor<double> x(Shape{2}, std::vector<double>{1, 2});
  x.set_requires_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    reverse_accumulate(tape, sum(x));
  }
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 1.0);

  x.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    auto loss = mean(square(x));
    reverse_accumulate(tape, loss);
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(2.0));
    // A second sweep adds the same gradient again.
    reverse_accumulate(tape, loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
    CHECK_THROWS_AS(reverse_accumulate(tape, square(x)), UsageError);
  }
  CHECK_THROWS_AS(reverse_accumulate(tape, x), UsageError);
}

TEST_CASE("reverse_accumulate is linear in the loss") {
  auto x = random_tensor<double>(Shape{2, 3, 4, 4}, 19);
  auto k = random_tensor<double>(Shape{3, 3, 3, 3}, 20);
  auto bias = random_tensor<double>(Shape{3}, 21);
  k.set_requires_grad();
  auto l1 = [&] { return probe_loss(tanh(conv2d(x, k, bias, 1, 1)), 1); };
  auto l2 = [&] { return mean(square(conv2d(x, k, bias, 1, 1))); };
  auto grads_of = [&](auto fn) {
    k.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    reverse_accumulate(tape, fn());
    return std::vector<double>(k.grad().begin(), k.grad().end());
  };
  const double a = 0.7, b = -2.5;
  auto g1 = grads_of(l1);
  auto g2 = grads_of(l2);
  auto g12 = grads_of([&] { return add(scale(l1(), a), scale(l2(), b)); });
  for (std::size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(a * g1[i] + b * g2[i]).epsilon(1e-10));
}

TEST_CASE("non-finite values are an error state") {
  Tensor<float> x(Shape{2}, std::vector<float>{1e30f, 1e30f});
  CHECK_THROWS_AS(square(x), NumericError);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor<float> p(Shape{3}, 1.5f);
    p.set_requires_grad();
    std::vector<Tensor<float>> ps{p};
    AdamState<float> st;
    adam_step(std::span<Tensor<float>>(ps), st);
    CHECK(st.step == 1);
    for (float v : p.values()) CHECK(v == 1.5f);
  }
  SUBCASE("first step moves by about lr") {
    Tensor<double> p(Shape{1}, 0.0);
    p.set_requires_grad();
    p.mutable_grad()[0] = 1.0;
    std::vector<Tensor<double>> ps{p};
    AdamState<double> st(AdamConfig{1e-4, 0.5, 0.999, 1e-8});
    adam_step(std::span<Tensor<double>>(ps), st);
    CHECK(p.item() == doctest::Approx(-1e-4).epsilon(1e-6));
  }
  SUBCASE("minimises x^2") {
    Tensor<double> p(Shape{1}, 1.0);
    p.set_requires_grad();
    std::vector<Tensor<double>> ps{p};
    AdamState<double> st(AdamConfig{0.01, 0.5, 0.999, 1e-8});
    for (int i = 0; i < 1000; ++i) {
      p.zero_grad();
      Tape tape;
      TapeScope scope(tape);
      reverse_accumulate(tape, sum(square(p)));
      adam_step(std::span<Tensor<double>>(ps), st);
    }
    CHECK(std::abs(p.item()) < 0.1);
    CHECK(st.step == 1000);
  }
  SUBCASE("invalid learning rate") {
    std::vector<Tensor<float>> ps{Tensor<float>(Shape{1})};
    AdamState<float> st(AdamConfig{0.0});
    CHECK_THROWS_AS(adam_step(std::span<Tensor<float>>(ps), st), ConfigError);
  }
}
