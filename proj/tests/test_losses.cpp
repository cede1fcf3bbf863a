#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "litefs/losses.hpp"

using namespace litefs;
using litefs::testing::grad_check;
using litefs::testing::random_tensor;

namespace {

// Returns a fixed embedding per call, in order; lets tests dictate cosines.
class ScriptedEmbedder final : public FaceEmbedder<double> {
 public:
  explicit ScriptedEmbedder(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {}
  FaceEmbedding<double> embed(const Tensor<double>& images) const override {
    const auto& r = rows_[calls_++ % rows_.size()];
    std::vector<double> v;
    for (std::int64_t b = 0; b < images.dim(0); ++b) v.insert(v.end(), r.begin(), r.end());
    return FaceEmbedding<double>::from_unit(Tensor<double>(Shape{images.dim(0), 2}, v));
  }
  std::int64_t dim() const override { return 2; }

 private:
  std::vector<std::vector<double>> rows_;
  mutable std::size_t calls_ = 0;
};

MultiScaleOutput<double> dummy_outputs() {
  MultiScaleOutput<double> o;
  o.images[quarter] = Tensor<double>(Shape{1, 3, 4, 4});
  o.images[half] = Tensor<double>(Shape{1, 3, 8, 8});
  o.images[full] = Tensor<double>(Shape{1, 3, 16, 16});
  return o;
}

}  // namespace

TEST_CASE("hinge discriminator loss") {
  Tensor<double> real(Shape{2, 1, 3, 3}, 1.5), fake(Shape{2, 1, 3, 3}, -1.0);
  CHECK(hinge_d_loss(real, fake).item() == 0.0);
  Tensor<double> zero(Shape{2, 1, 3, 3}, 0.0);
  CHECK(hinge_d_loss(zero, zero).item() == 2.0);

  auto r = random_tensor<double>(Shape{3, 1, 5, 5}, 1, -3, 3);
  auto f = random_tensor<double>(Shape{3, 1, 5, 5}, 2, -3, 3);
  double lr = 0, lf = 0;
  for (std::size_t i = 0; i < r.values().size(); ++i) {
    lr += -std::min(0.0, -1.0 + r.values()[i]);
    lf += -std::min(0.0, -1.0 - f.values()[i]);
  }
  const double n = static_cast<double>(r.numel());
  const double got = hinge_d_loss(r, f).item();
  CHECK(std::abs(got - (lr / n + lf / n)) < 1e-6);
  CHECK(got >= 0.0);
}

TEST_CASE("hinge generator loss") {
  CHECK(hinge_g_loss(Tensor<double>(Shape{1, 1, 4, 4}, 0.0)).item() == 0.0);
  CHECK(hinge_g_loss(Tensor<double>(Shape{1, 1, 4, 4}, 3.0)).item() == -3.0);
  auto f = random_tensor<double>(Shape{2, 1, 5, 5}, 3);
  double s = 0;
  for (double v : f.values()) s += v;
  CHECK(std::abs(hinge_g_loss(f).item() + s / f.numel()) < 1e-6);
}

TEST_CASE("identity loss worked examples") {
  const auto src = FaceEmbedding<double>::from_unit(Tensor<double>(Shape{1, 2}, {1.0, 0.0}));
  const LossWeights w;
  ScriptedEmbedder same({{1.0, 0.0}});
  CHECK(identity_loss(dummy_outputs(), src, same, w.beta_id).item() == 0.0);
  ScriptedEmbedder orthogonal({{0.0, 1.0}});
  CHECK(identity_loss(dummy_outputs(), src, orthogonal, w.beta_id).item() == doctest::Approx(20.04).epsilon(1e-12));
  // calls run quarter, half, full: antiparallel only at full
  ScriptedEmbedder anti({{1.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}});
  CHECK(identity_loss(dummy_outputs(), src, anti, w.beta_id).item() == doctest::Approx(40.0).epsilon(1e-12));
}

TEST_CASE("identity loss stays within [0, 2 * sum beta]") {
  const LossWeights w;
  ConvFaceEmbedder<double> emb(FaceEmbedderSpec{16, 8, WeightSource::builtin_test, {}});
  MultiScaleOutput<double> o;
  o.images[quarter] = random_tensor<double>(Shape{2, 3, 16, 16}, 1);
  o.images[half] = random_tensor<double>(Shape{2, 3, 32, 32}, 2);
  o.images[full] = random_tensor<double>(Shape{2, 3, 64, 64}, 3);
  auto src = FaceEmbedding<double>::normalized(random_tensor<double>(Shape{2, 8}, 4));
  const double v = identity_loss(o, src, emb, w.beta_id).item();
  CHECK(v >= 0.0);
  CHECK(v <= 2.0 * (20.0 + 0.02 + 0.02));
}

TEST_CASE("attribute loss") {
  IdentityExtractor<double> lin;
  auto a = random_tensor<double>(Shape{2, 3, 6, 6}, 1);
  auto b = random_tensor<double>(Shape{2, 3, 6, 6}, 2);
  CHECK(attribute_loss(a, a, lin).item() == 0.0);
  double l1 = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) l1 += std::abs(a.values()[i] - b.values()[i]);
  CHECK(std::abs(attribute_loss(a, b, lin).item() - l1 / a.numel()) < 1e-6);

  ConvFeatureExtractor<double> conv;
  auto fa = conv.extract(a), fb = conv.extract(b);
  double oracle = 0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    double s = 0;
    for (std::size_t i = 0; i < fa[k].values().size(); ++i) s += std::abs(fa[k].values()[i] - fb[k].values()[i]);
    oracle += s / fa[k].numel();
  }
  CHECK(std::abs(attribute_loss(a, b, conv).item() - oracle) < 1e-6);
  CHECK_THROWS_AS(attribute_loss(a, Tensor<double>(Shape{2, 3, 4, 4}), lin), DimensionError);
}

TEST_CASE("reconstruction loss") {
  auto x = random_tensor<double>(Shape{2, 3, 4, 4}, 1);
  CHECK(reconstruction_loss<double>(x, std::nullopt).item() == 0.0);
  CHECK(reconstruction_loss<double>(x, x).item() == 0.0);
  CHECK(reconstruction_loss<double>(add_scalar(x, 0.5), x).item() == doctest::Approx(0.25).epsilon(1e-12));

  auto gt = random_tensor<double>(Shape{2, 3, 4, 4}, 2);
  const double mask[] = {1.0, 0.0};
  const double full = reconstruction_loss<double>(x, gt).item();
  const double masked = masked_reconstruction_loss<double>(x, gt, mask).item();
  double first = 0;
  for (int i = 0; i < 48; ++i) first += std::pow(x.values()[i] - gt.values()[i], 2);
  CHECK(masked == doctest::Approx(first / 48 / 2));
  const double both[] = {1.0, 1.0};
  CHECK(masked_reconstruction_loss<double>(x, gt, both).item() == doctest::Approx(full));
}

TEST_CASE("total generator loss weighting and report") {
  const LossWeights w;
  auto z = [] { return Tensor<double>::scalar(0.0); };
  GeneratorLossParts<double> parts{{z(), z(), z()}, {z(), z(), z()}, z(), z()};
  CHECK(total_generator_loss(parts, w).first.item() == 0.0);
  parts.rec = Tensor<double>::scalar(1.0);
  CHECK(total_generator_loss(parts, w).first.item() == 10.0);

  GeneratorLossParts<float> pf;
  for (int s = 0; s < 3; ++s) {
    pf.adv[s] = Tensor<float>::scalar(0.37f * (s + 1) - 0.5f);
    pf.id[s] = Tensor<float>::scalar(0.11f * (s + 2));
  }
  pf.vgg = Tensor<float>::scalar(0.731f);
  pf.rec = Tensor<float>::scalar(0.0917f);
  auto [total, report] = total_generator_loss(pf, w);
  CHECK(total.item() == static_cast<float>(report.total_g));
  CHECK(recombine_total<float>(report, w) == total.item());
  CHECK(report.rows().size() == 15);

  LossWeights bad;
  bad.lambda_vgg = -1;
  CHECK_THROWS_AS(total_generator_loss(pf, bad), ConfigError);
}

TEST_CASE("a zero weight removes that term's gradient") {
  auto a = random_tensor<double>(Shape{4}, 1);
  auto v = random_tensor<double>(Shape{4}, 2);
  a.set_requires_grad(true);
  v.set_requires_grad(true);
  LossWeights w;
  w.lambda_vgg = 0.0;
  Tape tape;
  {
    TapeScope scope(tape);
    GeneratorLossParts<double> p;
    for (int s = 0; s < 3; ++s) {
      p.adv[s] = hinge_g_loss(a);
      p.id[s] = Tensor<double>::scalar(0.0);
    }
    p.vgg = mean(square(v));
    p.rec = Tensor<double>::scalar(0.0);
    auto [total, report] = total_generator_loss(p, w);
    reverse_accumulate(tape, total);
  }
  for (double g : v.grad()) CHECK(g == 0.0);
  for (double g : a.grad()) CHECK(g != 0.0);
}

TEST_CASE("loss gradients match finite differences") {
  auto r = random_tensor<double>(Shape{2, 1, 3, 3}, 1, -2, 2);
  auto f = random_tensor<double>(Shape{2, 1, 3, 3}, 2, -2, 2);
  CHECK(grad_check([&] { return hinge_d_loss(r, f); }, {r, f}).max_rel_error < 1e-4);
  ConvFaceEmbedder<double> emb(FaceEmbedderSpec{16, 8, WeightSource::builtin_test, {}});
  auto img = random_tensor<double>(Shape{2, 3, 16, 16}, 3);
  auto src = FaceEmbedding<double>::normalized(random_tensor<double>(Shape{2, 8}, 4));
  CHECK(grad_check([&] { return identity_term(img, src, emb); }, {img}, {}, 1e-6).max_rel_error < 1e-4);
  ConvFeatureExtractor<double> conv;
  auto tgt = random_tensor<double>(Shape{2, 3, 16, 16}, 5);
  CHECK(grad_check([&] { return attribute_loss(img, tgt, conv); }, {img}, {}, 1e-5).max_rel_error < 1e-4);
}
