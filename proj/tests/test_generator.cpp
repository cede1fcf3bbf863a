#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "litefs/generator.hpp"

using namespace litefs;
using litefs::testing::grad_check_sampled;
using litefs::testing::probe_loss;
using litefs::testing::random_tensor;

namespace {

GeneratorConfig small_config(Variant v = Variant::baseline) {
  GeneratorConfig c;
  c.channels = 8;
  c.embedding_dim = 16;
  c.resolution = 16;
  c.variant = v;
  return c;
}

template <typename T>
FaceEmbedding<T> random_embedding(std::int64_t batch, std::int64_t dim, std::uint64_t seed) {
  return FaceEmbedding<T>::normalized(random_tensor<T>(Shape{batch, dim}, seed));
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - b.values()[i]));
  }
  return m;
}

template <typename T>
void fill(Tensor<T> t, double v) {
  for (auto& x : t.mutable_values()) x = static_cast<T>(v);
}

// Two-pass per-(sample, channel) mean and population std.
std::pair<double, double> plane_stats(const Tensor<double>& x, std::int64_t b, std::int64_t c) {
  const std::int64_t hw = x.dim(2) * x.dim(3);
  const double* p = x.values().data() + (b * x.dim(1) + c) * hw;
  double mean = 0;
  for (std::int64_t i = 0; i < hw; ++i) mean += p[i];
  mean /= hw;
  double var = 0;
  for (std::int64_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
  return {mean, std::sqrt(var / hw)};
}

}  // namespace

TEST_CASE("face embedding enforces unit norm") {
  Tensor<float> rows(Shape{1, 4}, 0.5f);
  CHECK_NOTHROW(FaceEmbedding<float>::from_unit(rows));
  Tensor<float> bad(Shape{1, 4}, 1.0f);
  CHECK_THROWS_AS(FaceEmbedding<float>::from_unit(bad), ValidationError);
  auto n = FaceEmbedding<float>::normalized(bad);
  CHECK(n.rows().values()[0] == doctest::Approx(0.5));
}

TEST_CASE("config validation and variant parsing") {
  GeneratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.channels = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.attribute_blocks[1] = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.resolution = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_variant("hourglass") == Variant::hourglass);
  CHECK_THROWS_AS(parse_variant("deep"), ConfigError);
  CHECK(parse_stats_mode("batch") == StatsMode::batch);
  CHECK_THROWS_AS(parse_stats_mode("ema"), ConfigError);
}

TEST_CASE("parameter count arithmetic for a conv and an AdaIN pair") {
  ParamStore<float> store(1);
  auto conv = store.conv("c", 64, 64, 3, 1, 1);
  CHECK(conv.weight.numel() + conv.bias.numel() == 36928);
  auto m = store.linear("m", 512, 64, 0.02, 0.0);
  auto s = store.linear("s", 512, 64, 0.02, 1.0);
  CHECK(m.weight.numel() + m.bias.numel() + s.weight.numel() + s.bias.numel() == 65664);
}

TEST_CASE("baseline size and variant ordering") {
  GeneratorConfig c;
  auto count = [&](Variant v) {
    GeneratorConfig cv = c;
    cv.variant = v;
    return build_variant<float>(cv).param_count();
  };
  const auto base = count(Variant::baseline);
  CHECK(base.fp32_bytes == 4 * base.count);
  CHECK(base.megabytes() >= 9.2);
  CHECK(base.megabytes() <= 11.2);
  const auto shallow = count(Variant::shallow);
  const auto nofuse = count(Variant::nofuse);
  const auto hourglass = count(Variant::hourglass);
  const auto wide = count(Variant::wide);
  CHECK(shallow.count < base.count);
  CHECK(nofuse.count == base.count);
  CHECK(base.count < hourglass.count);
  CHECK(hourglass.count < wide.count);
  CHECK(wide.count > 30 * base.count);
}

TEST_CASE("parameter count is deterministic and every parameter is trainable") {
  auto a = Generator<float>(small_config(), 3);
  auto b = Generator<float>(small_config(), 9);
  CHECK(a.param_count().count == b.param_count().count);
  for (const auto& p : a.parameters()) CHECK(p.tensor.requires_grad());
}

TEST_CASE("encoder header shapes, bias-only response and purity") {
  GeneratorConfig c;
  Generator<float> g(c, 1);
  BlockContext ctx;
  Tensor<float> zero(Shape{1, 3, 256, 256}, 0.0f);
  auto h = encoder_header(zero, g.header(), ctx);
  CHECK(h.id.shape() == Shape{1, 64, 128, 128});
  CHECK(h.attr.shape() == Shape{1, 64, 128, 128});
  for (float v : h.id.values()) CHECK(std::isfinite(v));
  auto small = small_config();
  Generator<float> gs(small, 1);
  auto img = random_tensor<float>(Shape{2, 3, 16, 16}, 5);
  auto h1 = encoder_header(img, gs.header(), ctx);
  auto h2 = encoder_header(img, gs.header(), ctx);
  CHECK(max_abs_diff(h1.id, h2.id) == 0.0);
  CHECK(max_abs_diff(h1.attr, h2.attr) == 0.0);
  Tensor<float> wrong(Shape{1, 3, 32, 32}, 0.0f);
  CHECK_THROWS_AS(gs.forward(wrong, random_embedding<float>(1, 16, 1)), DimensionError);
}

TEST_CASE("adain with unit modulation normalizes each channel") {
  Generator<double> g(small_config(), 2);
  auto p = g.levels()[0].identity[0].adain;
  fill(p.mean_head.weight, 0.0);
  fill(p.mean_head.bias, 0.0);
  fill(p.scale_head.weight, 0.0);
  fill(p.scale_head.bias, 1.0);
  BlockContext ctx;
  ctx.stats = StatsMode::batch;
  auto x = random_tensor<double>(Shape{2, 8, 6, 6}, 3, -2.0, 5.0);
  auto y = adain(x, random_embedding<double>(2, 16, 4), p, ctx);
  // channel statistics pool over batch and space
  for (std::int64_t c = 0; c < 8; ++c) {
    double s = 0, sq = 0;
    const std::int64_t n = 2 * 36;
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t i = 0; i < 36; ++i) {
        const double v = y.values()[(b * 8 + c) * 36 + i];
        s += v;
        sq += v * v;
      }
    }
    CHECK(std::abs(s / n) < 1e-9);
    CHECK(std::sqrt(sq / n - (s / n) * (s / n)) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("adain with zero scale collapses to mu_id") {
  Generator<double> g(small_config(), 2);
  auto p = g.levels()[0].identity[0].adain;
  fill(p.scale_head.weight, 0.0);
  fill(p.scale_head.bias, 0.0);
  BlockContext ctx;
  ctx.stats = StatsMode::batch;
  auto f = random_embedding<double>(1, 16, 4);
  auto y = adain(random_tensor<double>(Shape{1, 8, 4, 4}, 3), f, p, ctx);
  auto mu = p.mean_head(f.rows());
  for (std::int64_t c = 0; c < 8; ++c) {
    for (std::int64_t i = 0; i < 16; ++i) CHECK(y.values()[c * 16 + i] == doctest::Approx(mu.values()[c]));
  }
}

TEST_CASE("adain output statistics follow the FC heads (single sample, batch mode)") {
  Generator<double> g(small_config(), 2);
  auto p = g.levels()[0].identity[0].adain;
  BlockContext ctx;
  ctx.stats = StatsMode::batch;
  ctx.eps = 0.0 + 1e-12;
  auto f = random_embedding<double>(1, 16, 8);
  auto x = random_tensor<double>(Shape{1, 8, 8, 8}, 9);
  auto y = adain(x, f, p, ctx);
  auto mu = p.mean_head(f.rows());
  auto sigma = p.scale_head(f.rows());
  for (std::int64_t c = 0; c < 8; ++c) {
    auto [m, s] = plane_stats(y, 0, c);
    CHECK(std::abs(m - mu.values()[c]) < 1e-4);
    CHECK(std::abs(s - std::abs(sigma.values()[c])) < 1e-4);
  }
}

TEST_CASE("adain running statistics are updated only in training") {
  Generator<double> g(small_config(), 2);
  auto p = g.levels()[0].identity[0].adain;
  auto before = p.running.mean.detach();
  BlockContext ctx;
  auto x = random_tensor<double>(Shape{2, 8, 4, 4}, 3, 1.0, 3.0);
  auto f = random_embedding<double>(2, 16, 4);
  adain(x, f, p, ctx);
  CHECK(max_abs_diff(before, p.running.mean) == 0.0);
  ctx.training = true;
  adain(x, f, p, ctx);
  CHECK(max_abs_diff(before, p.running.mean) > 0.0);
  CHECK_THROWS_AS(adain(x, random_embedding<double>(1, 16, 4), p, ctx), DimensionError);
}

TEST_CASE("identity block: shape, zero tail passthrough, gradient reaches the embedding") {
  Generator<double> g(small_config(), 2);
  auto p = g.levels()[0].identity[0];
  BlockContext ctx;
  ctx.stats = StatsMode::batch;
  auto x = random_tensor<double>(Shape{1, 8, 8, 8}, 3);
  auto f = random_embedding<double>(1, 16, 4);
  CHECK(identity_block(x, f, p, ctx).shape() == x.shape());

  auto zeroed = p;
  zeroed.conv2.weight = Tensor<double>(p.conv2.weight.shape(), 0.0);
  zeroed.conv2.bias = Tensor<double>(p.conv2.bias.shape(), 0.0);
  CHECK(max_abs_diff(identity_block(x, f, zeroed, ctx), x) == 0.0);

  // finite-difference probe on one embedding coordinate
  auto rows = f.rows().detach();
  auto out0 = identity_block(x, FaceEmbedding<double>::normalized(rows), p, ctx);
  rows.mutable_values()[3] += 1e-3;
  auto out1 = identity_block(x, FaceEmbedding<double>::normalized(rows), p, ctx);
  CHECK(max_abs_diff(out0, out1) > 1e-8);
}

TEST_CASE("attribute block: shape, zero in zero out, purity") {
  Generator<float> g(small_config(), 2);
  auto p = g.levels()[1].attribute[0];
  BlockContext ctx;
  auto x = random_tensor<float>(Shape{2, 8, 4, 4}, 7);
  auto y1 = attribute_block(x, p, ctx);
  CHECK(y1.shape() == x.shape());
  CHECK(max_abs_diff(y1, attribute_block(x, p, ctx)) == 0.0);
  auto zb = p;
  zb.conv1.bias = Tensor<float>(p.conv1.bias.shape(), 0.0f);
  zb.conv2.bias = Tensor<float>(p.conv2.bias.shape(), 0.0f);
  auto z = attribute_block(Tensor<float>(Shape{1, 8, 4, 4}, 0.0f), zb, ctx);
  for (float v : z.values()) CHECK(v == 0.0f);
}

TEST_CASE("attention fusion saturation and fixed point") {
  Generator<double> g(small_config(), 2);
  auto att = g.levels()[0].decoder[0].attention;
  auto xd = random_tensor<double>(Shape{1, 8, 4, 4}, 1);
  auto xa = random_tensor<double>(Shape{1, 8, 4, 4}, 2);
  Conv<double> hi = att, lo = att;
  hi.weight = Tensor<double>(att.weight.shape(), 0.0);
  lo.weight = hi.weight;
  hi.bias = Tensor<double>(att.bias.shape(), 20.0);
  lo.bias = Tensor<double>(att.bias.shape(), -20.0);
  CHECK(max_abs_diff(attention_fuse(xd, xa, hi, true), xd) < 1e-6);
  CHECK(max_abs_diff(attention_fuse(xd, xa, lo, true), xa) < 1e-6);
  CHECK(max_abs_diff(attention_fuse(xd, xd, att, true), xd) < 1e-12);
  CHECK(max_abs_diff(attention_fuse(xd, xa, att, false), xd) == 0.0);
  // convex combination elementwise
  auto y = attention_fuse(xd, xa, att, true);
  for (std::size_t i = 0; i < y.values().size(); ++i) {
    const double a = xd.values()[i], b = xa.values()[i];
    CHECK(y.values()[i] >= std::min(a, b) - 1e-12);
    CHECK(y.values()[i] <= std::max(a, b) + 1e-12);
  }
  auto bad = random_tensor<double>(Shape{1, 8, 2, 2}, 3);
  CHECK_THROWS_AS(decoder_block(xd, bad, g.levels()[0].decoder[0], BlockContext{}), DimensionError);
}

TEST_CASE("to_rgb range and zero response") {
  ParamStore<float> store(4);
  auto head = store.conv("rgb", 8, 3, 3, 1, 1, 5.0, 1.0);
  auto x = random_tensor<float>(Shape{2, 8, 8, 8}, 1, -10, 10);
  auto y = to_rgb(x, head);
  CHECK(y.shape() == Shape{2, 3, 8, 8});
  for (float v : y.values()) CHECK(std::abs(v) <= 1.0f);
  head.weight = Tensor<float>(head.weight.shape(), 0.0f);
  auto z = to_rgb(Tensor<float>(Shape{1, 8, 4, 4}, 0.0f), head);
  for (float v : z.values()) CHECK(v == 0.0f);
}

TEST_CASE("generator forward shapes, trace and fixed channel width") {
  GeneratorConfig c;
  c.resolution = 64;
  c.channels = 16;
  c.embedding_dim = 32;
  for (Variant v : {Variant::baseline, Variant::shallow, Variant::nofuse, Variant::hourglass, Variant::wide}) {
    CAPTURE(to_string(v));
    c.variant = v;
    Generator<float> g(c, 1);
    ForwardTrace trace;
    auto out = g.forward(random_tensor<float>(Shape{2, 3, 64, 64}, 1), random_embedding<float>(2, 32, 2), &trace);
    CHECK(out[quarter].shape() == Shape{2, 3, 16, 16});
    CHECK(out[half].shape() == Shape{2, 3, 32, 32});
    CHECK(out[full].shape() == Shape{2, 3, 64, 64});
    for (std::size_t s = 0; s < 3; ++s) {
      for (float x : out[s].values()) CHECK(std::abs(x) <= 1.0f);
    }
    if (v == Variant::hourglass) {
      CHECK(trace.identity_path_downsamples == 6);  // 64 -> 1
      CHECK(trace.upsamples == 6);
    } else {
      CHECK(trace.identity_path_downsamples == 3);
      CHECK(trace.attribute_path_downsamples == 3);
      CHECK(trace.upsamples == 3);
    }
    if (v != Variant::wide) {
      for (const auto& m : trace.maps) {
        CAPTURE(m.label);
        CHECK(m.shape[1] == 16);
      }
    }
  }
}

TEST_CASE("default resolution forward emits 64/128/256 with three downsamples") {
  GeneratorConfig c;
  c.channels = 8;
  Generator<float> g(c, 1);
  ForwardTrace trace;
  auto out = g.forward(random_tensor<float>(Shape{1, 3, 256, 256}, 1), random_embedding<float>(1, 512, 2), &trace);
  CHECK(out[quarter].shape() == Shape{1, 3, 64, 64});
  CHECK(out[half].shape() == Shape{1, 3, 128, 128});
  CHECK(out[full].shape() == Shape{1, 3, 256, 256});
  CHECK(trace.identity_path_downsamples == 3);
  std::int64_t coarsest = 1 << 20;
  for (const auto& m : trace.maps) coarsest = std::min(coarsest, m.shape[2]);
  CHECK(coarsest == 32);
}

TEST_CASE("inference is deterministic and uses every input") {
  Generator<float> g(small_config(), 5);
  auto target = random_tensor<float>(Shape{1, 3, 16, 16}, 1);
  auto f = random_embedding<float>(1, 16, 2);
  auto a = g.forward(target, f);
  auto b = g.forward(target, f);
  for (std::size_t s = 0; s < 3; ++s) CHECK(max_abs_diff(a[s], b[s]) == 0.0);

  auto other = g.forward(target, random_embedding<float>(1, 16, 3));
  for (std::size_t s = 0; s < 3; ++s) CHECK(max_abs_diff(a[s], other[s]) > 0.0);

  auto edited = target.detach();
  edited.mutable_values()[0] += 0.5f;  // corner pixel: background
  auto bg = g.forward(edited, f);
  for (std::size_t s = 0; s < 3; ++s) CHECK(max_abs_diff(a[s], bg[s]) > 0.0);
}

TEST_CASE("generator parameter gradients match finite differences") {
  GeneratorConfig c = small_config();
  c.resolution = 8;
  Generator<double> g(c, 7);
  g.set_training(true);
  auto target = random_tensor<double>(Shape{2, 3, 8, 8}, 1);
  auto f = random_embedding<double>(2, 16, 2);
  auto loss_fn = [&] {
    auto out = g.forward(target, f);
    return add(add(probe_loss(out[quarter], 11), probe_loss(out[half], 12)), probe_loss(out[full], 13));
  };
  auto params = g.parameter_tensors();
  auto result = grad_check_sampled(loss_fn, params, 20, 1e-6);
  CHECK(result.checked == 20);
  CHECK(result.max_rel_error < 1e-4);
}
