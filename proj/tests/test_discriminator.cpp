#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "litefs/discriminator.hpp"

using namespace litefs;
using litefs::testing::grad_check;
using litefs::testing::probe_loss;
using litefs::testing::random_tensor;

TEST_CASE("critics emit patch maps at every scale") {
  DiscriminatorConfig c;
  c.base_channels = 4;
  Discriminator<float> d(c, 1);
  for (auto s : {quarter, half, full}) {
    const std::int64_t size = 256 >> (2 - s);
    auto logits = d.forward(random_tensor<float>(Shape{2, 3, size, size}, 1), s);
    CHECK(logits.rank() == 4);
    CHECK(logits.dim(0) == 2);
    CHECK(logits.dim(1) == 1);
    CHECK(logits.dim(2) > 1);
    CHECK(logits.dim(3) > 1);
    if (s == full) CHECK(logits.dim(2) >= 4);
  }
  int stride2 = 0;
  for (const auto& st : d.critic(full).stages) stride2 += st.stride == 2;
  CHECK(stride2 >= 3);
}

TEST_CASE("critic rejects the wrong scale") {
  DiscriminatorConfig c;
  c.base_channels = 2;
  Discriminator<float> d(c, 1);
  CHECK_THROWS_AS(d.forward(Tensor<float>(Shape{1, 3, 128, 128}), quarter), DimensionError);
  CHECK_THROWS_AS(d.forward(Tensor<float>(Shape{1, 1, 64, 64}), quarter), DimensionError);
}

TEST_CASE("zero weights give zero logits") {
  DiscriminatorConfig c;
  c.base_channels = 2;
  c.resolution = 64;
  Discriminator<float> d(c, 1);
  for (auto& p : d.parameters()) {
    for (auto& v : p.tensor.mutable_values()) v = 0.0f;
  }
  auto logits = d.forward(random_tensor<float>(Shape{1, 3, 64, 64}, 3), full);
  for (float v : logits.values()) CHECK(v == 0.0f);
}

TEST_CASE("critics are independent") {
  DiscriminatorConfig c;
  c.base_channels = 2;
  c.resolution = 64;
  Discriminator<double> d(c, 1);
  const auto& q = d.critic(quarter);
  const auto& f = d.critic(full);
  CHECK_FALSE(q.stages[0].weight.shares_storage(f.stages[0].weight));
  CHECK(d.parameters().size() == 3 * 10);
}

TEST_CASE("tiny critic gradients match finite differences") {
  DiscriminatorConfig c;
  c.base_channels = 2;
  c.resolution = 32;
  Discriminator<double> d(c, 4);
  auto x = random_tensor<double>(Shape{2, 3, 8, 8}, 5);
  std::vector<Tensor<double>> params{x};
  for (const auto& s : d.critic(quarter).stages) {
    params.push_back(s.weight);
    params.push_back(s.bias);
  }
  params.push_back(d.critic(quarter).head.weight);
  params.push_back(d.critic(quarter).head.bias);
  auto r = grad_check([&] { return probe_loss(d.forward(x, quarter)); }, params, {}, 1e-6);
  CHECK(r.checked > 500);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("logit maps are covariant under stride-multiple shifts") {
  DiscriminatorConfig c;
  c.base_channels = 2;
  Discriminator<double> d(c, 6);
  auto a = random_tensor<double>(Shape{1, 3, 256, 256}, 7);
  auto b = random_tensor<double>(Shape{1, 3, 256, 256}, 8);
  const std::int64_t shift = 8;  // total stride of the critic
  for (std::int64_t ch = 0; ch < 3; ++ch) {
    for (std::int64_t y = 0; y + shift < 256; ++y) {
      for (std::int64_t x = 0; x + shift < 256; ++x) {
        b.mutable_values()[(ch * 256 + y + shift) * 256 + x + shift] = a.values()[(ch * 256 + y) * 256 + x];
      }
    }
  }
  auto la = d.forward(a, full);
  auto lb = d.forward(b, full);
  const std::int64_t w = la.dim(3);
  // receptive fields of these positions lie inside both images
  for (std::int64_t i = 5; i < 25; ++i) {
    for (std::int64_t j = 5; j < 25; ++j) {
      CHECK(std::abs(la.values()[i * w + j] - lb.values()[(i + 1) * w + j + 1]) < 1e-10);
    }
  }
}
