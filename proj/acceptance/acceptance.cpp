// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   litefs_acceptance [criterion numbers...]   (default: all)
// Set LITEFS_ACCEPTANCE_DIR to keep the work files (default: a temp directory).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "../tests/gradcheck.hpp"
#include "litefs/alignment.hpp"
#include "litefs/cli.hpp"
#include "litefs/discriminator.hpp"
#include "litefs/generator.hpp"
#include "litefs/image_io.hpp"
#include "litefs/losses.hpp"
#include "litefs/pipeline.hpp"
#include "litefs/synthetic.hpp"
#include "litefs/trainer.hpp"
#include "litefs/triplet_forge.hpp"
#include "litefs/weights_io.hpp"

using namespace litefs;
using litefs::testing::grad_check;
using litefs::testing::grad_check_sampled;
using litefs::testing::probe_loss;
using litefs::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::filesystem::path work_dir;

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
  }
  return m;
}

GeneratorConfig block_config() {
  GeneratorConfig c;
  c.channels = 8;
  c.embedding_dim = 16;
  c.resolution = 16;
  return c;
}

FaceEmbedding<double> random_embedding(std::int64_t batch, std::int64_t dim, std::uint64_t seed) {
  NoTapeScope off;
  return FaceEmbedding<double>::normalized(random_tensor<double>(Shape{batch, dim}, seed));
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_integrity() {
  struct Check {
    std::string name;
    std::function<testing::GradCheckResult()> run;
  };
  std::vector<Check> checks;
  auto check = [&](std::string name, std::function<testing::GradCheckResult()> fn) {
    checks.push_back({std::move(name), std::move(fn)});
  };

  auto x = random_tensor<double>(Shape{2, 4, 8, 8}, 2);
  auto k3 = random_tensor<double>(Shape{8, 4, 3, 3}, 3);
  auto k4 = random_tensor<double>(Shape{3, 4, 4, 4}, 5);
  auto b8 = random_tensor<double>(Shape{8}, 4);
  auto b3 = random_tensor<double>(Shape{3}, 6);
  check("conv2d k3 s2 p1", [=] { return grad_check([&] { return probe_loss(conv2d(x, k3, b8, 2, 1)); }, {x, k3, b8}); });
  check("conv2d k4 s1 p2", [=] { return grad_check([&] { return probe_loss(conv2d(x, k4, b3, 1, 2)); }, {x, k4, b3}); });
  auto xf = random_tensor<double>(Shape{3, 20}, 7);
  auto wf = random_tensor<double>(Shape{6, 20}, 8);
  auto bf = random_tensor<double>(Shape{6}, 9);
  check("fully_connected", [=] { return grad_check([&] { return probe_loss(fully_connected(xf, wf, bf)); }, {xf, wf, bf}); });
  auto p = random_tensor<double>(Shape{3, 7}, 10, -3, 3);
  auto q = random_tensor<double>(Shape{3, 7}, 11, -3, 3);
  check("leaky_relu", [=] { return grad_check([&] { return probe_loss(leaky_relu(p, 0.2)); }, {p}); });
  check("relu", [=] { return grad_check([&] { return probe_loss(relu(p)); }, {p}); });
  check("tanh", [=] { return grad_check([&] { return probe_loss(litefs::tanh(p)); }, {p}); });
  check("sigmoid", [=] { return grad_check([&] { return probe_loss(sigmoid(p)); }, {p}); });
  check("add", [=] { return grad_check([&] { return probe_loss(add(p, q)); }, {p, q}); });
  check("sub", [=] { return grad_check([&] { return probe_loss(sub(p, q)); }, {p, q}); });
  check("mul", [=] { return grad_check([&] { return probe_loss(mul(p, q)); }, {p, q}); });
  check("scale", [=] { return grad_check([&] { return probe_loss(scale(p, 2.5)); }, {p}); });
  check("add_scalar", [=] { return grad_check([&] { return probe_loss(add_scalar(p, 0.3)); }, {p}); });
  check("abs", [=] { return grad_check([&] { return probe_loss(litefs::abs(p)); }, {p}); });
  check("square", [=] { return grad_check([&] { return probe_loss(square(p)); }, {p}); });
  check("sum", [=] { return grad_check([&] { return sum(square(p)); }, {p}); });
  check("mean", [=] { return grad_check([&] { return mean(square(p)); }, {p}); });
  const std::vector<double> w3{0.5, -1.0, 2.0};
  check("sample_means/weighted_sum", [=] {
    return grad_check([&] { return weighted_sum(sample_means(square(p)), std::span<const double>(w3)); }, {p});
  });
  auto img = random_tensor<double>(Shape{2, 3, 6, 8}, 12);
  check("channel_stats/normalize_channels", [=] {
    return grad_check(
        [&] {
          const auto s = channel_stats(img, 1e-5);
          return probe_loss(normalize_channels(img, s.mean, s.std));
        },
        {img});
  });
  auto ms = random_tensor<double>(Shape{2, 3}, 13), mb = random_tensor<double>(Shape{2, 3}, 14);
  check("modulate_channels", [=] { return grad_check([&] { return probe_loss(modulate_channels(img, ms, mb)); }, {img, ms, mb}); });
  check("upsample x2", [=] { return grad_check([&] { return probe_loss(resample(img, Resample::up2_nearest)); }, {img}); });
  check("avg_pool2", [=] { return grad_check([&] { return probe_loss(avg_pool2(img)); }, {img}); });
  check("resize_bilinear", [=] { return grad_check([&] { return probe_loss(resize_bilinear(img, 5, 11)); }, {img}); });
  check("normalize_rows", [=] { return grad_check([&] { return probe_loss(normalize_rows(p)); }, {p}); });
  check("row_dot", [=] { return grad_check([&] { return probe_loss(row_dot(p, q)); }, {p, q}); });

  // generator blocks (small widths, all parameters)
  auto gen = std::make_shared<Generator<double>>(block_config(), 21);
  const auto f = random_embedding(2, 16, 22);
  auto hx = random_tensor<double>(Shape{2, 8, 4, 4}, 23);
  auto hx2 = random_tensor<double>(Shape{2, 8, 4, 4}, 24);
  auto frows = f.rows();
  BlockContext train_ctx;
  train_ctx.training = true;
  auto params_of = [](std::initializer_list<const Conv<double>*> convs) {
    std::vector<Tensor<double>> out;
    for (auto* c : convs) {
      out.push_back(c->weight);
      out.push_back(c->bias);
    }
    return out;
  };
  check("adain (batch stats)", [=] {
    const auto& pa = gen->levels()[0].identity[0].adain;
    std::vector<Tensor<double>> ps{hx, frows, pa.mean_head.weight, pa.mean_head.bias, pa.scale_head.weight,
                                   pa.scale_head.bias};
    return grad_check([&] { return probe_loss(adain(hx, FaceEmbedding<double>::normalized(frows), pa, train_ctx)); }, ps);
  });
  check("identity block", [=] {
    const auto& pb = gen->levels()[0].identity[0];
    auto ps = params_of({&pb.conv1, &pb.conv2});
    ps.push_back(hx);
    return grad_check([&] { return probe_loss(identity_block(hx, f, pb, train_ctx)); }, ps);
  });
  check("attribute block", [=] {
    const auto& pb = gen->levels()[0].attribute[0];
    auto ps = params_of({&pb.conv1, &pb.conv2});
    ps.push_back(hx);
    return grad_check([&] { return probe_loss(attribute_block(hx, pb, train_ctx)); }, ps);
  });
  check("decoder block (attention fusion)", [=] {
    const auto& pb = gen->levels()[0].decoder[0];
    auto ps = params_of({&pb.attention, &pb.conv1, &pb.conv2});
    ps.push_back(hx);
    ps.push_back(hx2);
    return grad_check([&] { return probe_loss(decoder_block(hx, hx2, pb, train_ctx)); }, ps);
  });
  check("rgb head", [=] {
    const auto& head = *gen->levels()[0].rgb;
    return grad_check([&] { return probe_loss(to_rgb(hx, head)); }, params_of({&head}));
  });

  // critic and losses
  DiscriminatorConfig dc;
  dc.resolution = 32;
  dc.base_channels = 2;
  auto disc = std::make_shared<Discriminator<double>>(dc, 31);
  auto dimg = random_tensor<double>(Shape{1, 3, 8, 8}, 32);
  check("critic", [=] {
    std::vector<Tensor<double>> ps{dimg};
    for (const auto& s : disc->critic(quarter).stages) {
      ps.push_back(s.weight);
      ps.push_back(s.bias);
    }
    return grad_check([&] { return probe_loss(disc->forward(dimg, quarter)); }, ps);
  });
  auto rl = random_tensor<double>(Shape{2, 1, 3, 3}, 33, -2, 2), fl = random_tensor<double>(Shape{2, 1, 3, 3}, 34, -2, 2);
  check("hinge_d", [=] { return grad_check([&] { return hinge_d_loss(rl, fl); }, {rl, fl}); });
  check("hinge_g", [=] { return grad_check([&] { return hinge_g_loss(fl); }, {fl}); });
  auto emb = std::make_shared<ConvFaceEmbedder<double>>(FaceEmbedderSpec{16, 8, WeightSource::builtin_test, {}});
  auto face = random_tensor<double>(Shape{2, 3, 16, 16}, 35);
  const auto fsrc = random_embedding(2, 8, 36);
  check("identity term", [=] { return grad_check([&] { return identity_term(face, fsrc, *emb); }, {face}); });
  auto ext = std::make_shared<ConvFeatureExtractor<double>>();
  auto other = random_tensor<double>(Shape{2, 3, 16, 16}, 37);
  check("attribute loss", [=] { return grad_check([&] { return attribute_loss(face, other, *ext); }, {face}); });
  check("reconstruction", [=] {
    return grad_check([&] { return reconstruction_loss<double>(face, std::optional<Tensor<double>>(other)); }, {face});
  });
  const std::vector<double> mask{1.0, 0.0};
  check("masked reconstruction", [=] {
    return grad_check([&] { return masked_reconstruction_loss<double>(face, other, mask); }, {face});
  });

  double worst_op = 0;
  std::string worst_name;
  std::size_t probes = 0;
  for (const auto& c : checks) {
    const auto r = c.run();
    probes += r.checked;
    if (r.checked == 0) return {false, c.name + ": no probes evaluated"};
    if (r.max_rel_error > worst_op) {
      worst_op = r.max_rel_error;
      worst_name = c.name;
    }
  }

  // End-to-end: smoke-scale generator + every loss, sampled parameters.
  const auto smoke = TrainConfig::smoke();
  Generator<double> g(smoke.generator, 3);
  g.set_training(true);
  Discriminator<double> d(smoke.discriminator, 4);
  ConvFaceEmbedder<double> e(smoke.embedder);
  ConvFeatureExtractor<double> fx;
  const auto source = random_tensor<double>(Shape{2, 3, 64, 64}, 1);
  const auto target = random_tensor<double>(Shape{2, 3, 64, 64}, 2);
  const auto gt = random_tensor<double>(Shape{2, 3, 64, 64}, 3);
  const std::vector<double> has_gt{1.0, 0.0};
  const auto f_src = [&] {
    NoTapeScope off;
    return e.embed(source);
  }();
  auto loss = [&] {
    const auto out = g.forward(target, f_src);
    const auto parts = generator_loss_parts<double>(out, f_src, target, gt, has_gt, d, e, fx, {true, true, true});
    return total_generator_loss(parts, smoke.weights).first;
  };
  const auto e2e = grad_check_sampled(loss, g.parameter_tensors(), 20, 1e-6);

  const bool pass = worst_op < 1e-4 && e2e.max_rel_error < 1e-3 && e2e.checked >= 15;
  return {pass, std::to_string(checks.size()) + " ops/blocks/losses, " + std::to_string(probes) +
                    " probes, max rel err " + fmt(worst_op) + " (" + worst_name + ") < 1e-4; end-to-end " +
                    std::to_string(e2e.checked) + " sampled params max rel err " + fmt(e2e.max_rel_error) + " < 1e-3"};
}

// ---- 2 ----------------------------------------------------------------------

Outcome adain_contract() {
  Generator<double> g(block_config(), 2);
  const auto& p = g.levels()[0].identity[0].adain;
  BlockContext ctx;
  ctx.stats = StatsMode::batch;
  ctx.eps = 1e-12;
  double worst = 0;
  int planes = 0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    NoTapeScope off;
    const auto f = random_embedding(1, 16, 100 + trial);
    const auto x = random_tensor<double>(Shape{1, 8, 8, 8}, 200 + trial, -3.0, 5.0);
    const auto y = adain(x, f, p, ctx);
    // Oracle: FC heads by scalar loop, statistics by two passes.
    const auto fr = f.rows().values();
    for (std::int64_t c = 0; c < 8; ++c) {
      double mu = p.mean_head.bias.values()[c], sigma = p.scale_head.bias.values()[c];
      for (std::int64_t k = 0; k < 16; ++k) {
        mu += p.mean_head.weight.values()[c * 16 + k] * fr[k];
        sigma += p.scale_head.weight.values()[c * 16 + k] * fr[k];
      }
      const double* plane = y.values().data() + c * 64;
      double m = 0;
      for (int i = 0; i < 64; ++i) m += plane[i];
      m /= 64;
      double v = 0;
      for (int i = 0; i < 64; ++i) v += (plane[i] - m) * (plane[i] - m);
      const double s = std::sqrt(v / 64);
      worst = std::max({worst, std::abs(m - mu), std::abs(s - std::abs(sigma))});
      ++planes;
    }
  }
  return {worst < 1e-4, std::to_string(planes) + " channel planes, max |stat - (mu_id, |sigma_id|)| = " + fmt(worst) +
                            " < 1e-4"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome fusion_contract() {
  NoTapeScope off;
  Generator<double> g(block_config(), 2);
  const auto att = g.levels()[0].decoder[0].attention;
  const auto xd = random_tensor<double>(Shape{2, 8, 4, 4}, 1);
  const auto xa = random_tensor<double>(Shape{2, 8, 4, 4}, 2);
  Conv<double> hi = att, lo = att;
  hi.weight = Tensor<double>(att.weight.shape(), 0.0);
  lo.weight = hi.weight;
  hi.bias = Tensor<double>(att.bias.shape(), 40.0);
  lo.bias = Tensor<double>(att.bias.shape(), -40.0);
  const double to_dec = max_abs_diff(attention_fuse(xd, xa, hi, true), xd);
  const double to_attr = max_abs_diff(attention_fuse(xd, xa, lo, true), xa);
  const double fixed = max_abs_diff(attention_fuse(xd, xd, att, true), xd);
  // convex combination elementwise for the trained-init attention
  const auto y = attention_fuse(xd, xa, att, true);
  bool convex = true;
  for (std::size_t i = 0; i < y.values().size(); ++i) {
    const double a = xd.values()[i], b = xa.values()[i];
    convex = convex && y.values()[i] >= std::min(a, b) - 1e-12 && y.values()[i] <= std::max(a, b) + 1e-12;
  }
  const bool pass = to_dec < 1e-6 && to_attr < 1e-6 && fixed < 1e-6 && convex;
  return {pass, "M->1 gives x_dec (err " + fmt(to_dec) + "), M->0 gives x_attr (err " + fmt(to_attr) +
                    "), x_dec==x_attr fixed point (err " + fmt(fixed) + "), convex=" + (convex ? "yes" : "no")};
}

// ---- 4 ----------------------------------------------------------------------

Outcome architecture_principles() {
  NoTapeScope off;
  GeneratorConfig c;  // baseline defaults: N = 64, 256x256
  Generator<float> g(c, 1);
  ForwardTrace trace;
  const auto f = FaceEmbedding<float>::normalized(random_tensor<float>(Shape{1, 512}, 2));
  const auto out = g.forward(random_tensor<float>(Shape{1, 3, 256, 256}, 1), f, &trace);
  bool all64 = !trace.maps.empty();
  std::string offender;
  for (const auto& m : trace.maps) {
    if (m.shape[1] != 64) {
      all64 = false;
      offender = m.label;
    }
  }
  const bool sizes = out[quarter].shape() == Shape{1, 3, 64, 64} && out[half].shape() == Shape{1, 3, 128, 128} &&
                     out[full].shape() == Shape{1, 3, 256, 256};
  const bool downs = trace.identity_path_downsamples == 3 && trace.attribute_path_downsamples == 3;
  return {all64 && sizes && downs,
          "downsamples id/attr = " + std::to_string(trace.identity_path_downsamples) + "/" +
              std::to_string(trace.attribute_path_downsamples) + ", " + std::to_string(trace.maps.size()) +
              " inter-block maps " + (all64 ? "all 64 channels" : "not all 64 channels (" + offender + ")") +
              ", outputs " + shape_string(out[quarter].shape()) + " " + shape_string(out[half].shape()) + " " +
              shape_string(out[full].shape())};
}

// ---- 5 ----------------------------------------------------------------------

Outcome size_reproduction() {
  auto bytes = [](Variant v) {
    GeneratorConfig c;
    c.variant = v;
    return build_variant<float>(c).param_count();
  };
  const auto base = bytes(Variant::baseline), shallow = bytes(Variant::shallow), nofuse = bytes(Variant::nofuse),
             hourglass = bytes(Variant::hourglass), wide = bytes(Variant::wide);
  const bool in_band = base.megabytes() >= 9.2 && base.megabytes() <= 11.2;
  const bool order = shallow.count < base.count && base.count == nofuse.count && base.count < hourglass.count &&
                     hourglass.count < wide.count;
  const bool shallow_small = shallow.megabytes() < 10.2;
  const bool wide_big = wide.count > 30 * base.count;
  return {in_band && order && shallow_small && wide_big,
          "MB: shallow " + fmt(shallow.megabytes(), 4) + " < baseline " + fmt(base.megabytes(), 4) + " = nofuse " +
              fmt(nofuse.megabytes(), 4) + " < hourglass " + fmt(hourglass.megabytes(), 4) + " < wide " +
              fmt(wide.megabytes(), 5) + " (" + fmt(static_cast<double>(wide.count) / base.count) +
              "x baseline); baseline in [9.2, 11.2]"};
}

// ---- 6 ----------------------------------------------------------------------

// Fixed embeddings per call, to dictate cosine similarities.
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

Outcome loss_arithmetic() {
  NoTapeScope off;
  double worst = 0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto r = random_tensor<double>(Shape{3, 1, 5, 5}, 10 * t + 1, -3, 3);
    const auto fk = random_tensor<double>(Shape{3, 1, 5, 5}, 10 * t + 2, -3, 3);
    double lr = 0, lf = 0, sf = 0;
    for (std::size_t i = 0; i < r.values().size(); ++i) {
      lr += std::max(0.0, 1.0 - r.values()[i]);
      lf += std::max(0.0, 1.0 + fk.values()[i]);
      sf += fk.values()[i];
    }
    const double n = static_cast<double>(r.numel());
    track(hinge_d_loss(r, fk).item(), lr / n + lf / n);
    track(hinge_g_loss(fk).item(), -sf / n);

    ConvFaceEmbedder<double> emb(FaceEmbedderSpec{16, 8, WeightSource::builtin_test, {}});
    const auto img = random_tensor<double>(Shape{2, 3, 16, 16}, 10 * t + 3);
    const auto fs = random_embedding(2, 8, 10 * t + 4);
    const auto fo = emb.embed(img);
    double id = 0;
    for (int b = 0; b < 2; ++b) {
      double dot = 0;
      for (int k = 0; k < 8; ++k) dot += fs.rows().values()[b * 8 + k] * fo.rows().values()[b * 8 + k];
      id += 1.0 - dot;
    }
    track(identity_term(img, fs, emb).item(), id / 2);

    ConvFeatureExtractor<double> ext;
    const auto other = random_tensor<double>(Shape{2, 3, 16, 16}, 10 * t + 5);
    const auto fa = ext.extract(img), fb = ext.extract(other);
    double attr = 0;
    for (std::size_t k = 0; k < fa.size(); ++k) {
      double s = 0;
      for (std::size_t i = 0; i < fa[k].values().size(); ++i) s += std::abs(fa[k].values()[i] - fb[k].values()[i]);
      attr += s / static_cast<double>(fa[k].numel());
    }
    track(attribute_loss(img, other, ext).item(), attr);

    double mse = 0, first = 0;
    const std::size_t per = img.values().size() / 2;
    for (std::size_t i = 0; i < img.values().size(); ++i) {
      const double dd = (img.values()[i] - other.values()[i]) * (img.values()[i] - other.values()[i]);
      mse += dd;
      if (i < per) first += dd;
    }
    track(reconstruction_loss<double>(img, other).item(), mse / static_cast<double>(img.numel()));
    const std::vector<double> mask{1.0, 0.0};
    track(masked_reconstruction_loss<double>(img, other, mask).item(), first / static_cast<double>(per) / 2.0);

    const LossWeights w;
    GeneratorLossParts<double> parts;
    std::mt19937_64 rng(t);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    double oracle = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double a = u(rng) - 1.0, i = u(rng);
      parts.adv[s] = Tensor<double>::scalar(a);
      parts.id[s] = Tensor<double>::scalar(i);
      oracle += w.lambda_adv * w.alpha_adv[s] * a + w.lambda_id * w.beta_id[s] * i;
    }
    const double vgg = u(rng), rec = u(rng);
    parts.vgg = Tensor<double>::scalar(vgg);
    parts.rec = Tensor<double>::scalar(rec);
    oracle += w.lambda_vgg * vgg + w.lambda_rec * rec;
    const auto [total, report] = total_generator_loss(parts, w);
    track(total.item(), oracle);
    if (recombine_total<double>(report, w) != total.item()) return {false, "report does not recombine bit-exactly"};
  }

  // Worked examples with the default weights, exact.
  const LossWeights w;
  MultiScaleOutput<double> o;
  o.images[quarter] = Tensor<double>(Shape{1, 3, 4, 4});
  o.images[half] = Tensor<double>(Shape{1, 3, 8, 8});
  o.images[full] = Tensor<double>(Shape{1, 3, 16, 16});
  const auto src = FaceEmbedding<double>::from_unit(Tensor<double>(Shape{1, 2}, {1.0, 0.0}));
  std::vector<std::string> failed;
  int examples = 0;
  auto expect = [&](const std::string& name, double got, double want) {
    ++examples;
    if (got != want) failed.push_back(name + " = " + fmt(got, 17));
  };
  expect("hinge_d(margins met)", hinge_d_loss(Tensor<double>(Shape{2, 1, 2, 2}, 1.0), Tensor<double>(Shape{2, 1, 2, 2}, -1.0)).item(), 0.0);
  expect("hinge_d(0,0)", hinge_d_loss(Tensor<double>(Shape{1, 1, 2, 2}, 0.0), Tensor<double>(Shape{1, 1, 2, 2}, 0.0)).item(), 2.0);
  expect("hinge_g(0)", hinge_g_loss(Tensor<double>(Shape{1, 1, 2, 2}, 0.0)).item(), 0.0);
  expect("hinge_g(3)", hinge_g_loss(Tensor<double>(Shape{1, 1, 2, 2}, 3.0)).item(), -3.0);
  ScriptedEmbedder same({{1.0, 0.0}}), orth({{0.0, 1.0}}), anti({{1.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}});
  expect("identity(same)", identity_loss(o, src, same, w.beta_id).item(), 0.0);
  expect("identity(orthogonal)", identity_loss(o, src, orth, w.beta_id).item(), 20.0 + 0.02 + 0.02);
  expect("identity(antiparallel at 256)", identity_loss(o, src, anti, w.beta_id).item(), 40.0);
  const auto x = random_tensor<double>(Shape{1, 3, 4, 4}, 77);
  IdentityExtractor<double> lin;
  expect("attribute(x, x)", attribute_loss(x, x, lin).item(), 0.0);
  expect("rec(no gt)", reconstruction_loss<double>(x, std::nullopt).item(), 0.0);
  expect("rec(x, x)", reconstruction_loss<double>(x, x).item(), 0.0);
  expect("rec(offset 0.5)", reconstruction_loss<double>(Tensor<double>(Shape{1, 3, 2, 2}, 0.5), Tensor<double>(Shape{1, 3, 2, 2}, 0.0)).item(), 0.25);
  auto z = [] { return Tensor<double>::scalar(0.0); };
  GeneratorLossParts<double> zero{{z(), z(), z()}, {z(), z(), z()}, z(), z()};
  expect("total(zero)", total_generator_loss(zero, w).first.item(), 0.0);
  zero.rec = Tensor<double>::scalar(1.0);
  expect("total(rec = 1)", total_generator_loss(zero, w).first.item(), 10.0);

  const bool pass = worst < 1e-6 && failed.empty();
  std::string detail = "max |loss - scalar-loop oracle| = " + fmt(worst) + " < 1e-6 over 35 random cases; " + std::to_string(examples) + " worked examples ";
  detail += failed.empty() ? "exact" : "failed: " + failed.front();
  return {pass, detail};
}

// ---- 7 ----------------------------------------------------------------------

Outcome triplet_rules() {
  Dataset d;
  for (int i = 0; i < 6; ++i) {
    const auto f = synthetic_face(16, static_cast<std::uint64_t>(i / 2), static_cast<std::uint64_t>(i));
    d.images.push_back({{"img" + std::to_string(i) + ".ppm", "id" + std::to_string(i / 2), 16}, f.image});
  }
  SampleConfig cfg;
  cfg.triplet_fraction = 1.0;
  std::mt19937_64 rng(99);
  std::set<SchemaTag> seen;
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto draw = draw_triplet(d, cfg, rng);
    const auto t = realize(d, draw);
    seen.insert(t.tag);
    if (!t.gt) {
      ++violations;
      continue;
    }
    bool ok;
    if (t.tag == SchemaTag::pair_id_edit) {
      // the source is untouched and gt is the unedited photo of the same person
      ok = bit_equal(t.source, d.images[draw.first].pixels) && bit_equal(*t.gt, d.images[draw.second].pixels) &&
           d.images[draw.first].record.identity_id == d.images[draw.second].record.identity_id;
    } else if (draw.op.kind == EditKind::identity_edit) {
      ok = bit_equal(*t.gt, t.source);
    } else {
      ok = bit_equal(*t.gt, t.target);
    }
    violations += !ok;
  }
  cfg.triplet_fraction = 0.4;
  std::mt19937_64 draws(2024);
  int with_gt = 0;
  for (int i = 0; i < 10000; ++i) with_gt += draw_triplet(d, cfg, draws).tag != SchemaTag::pair_plain;
  const double frac = with_gt / 10000.0;
  const bool pass = violations == 0 && seen.size() == 5 && std::abs(frac - 0.4) <= 0.02;
  return {pass, "10000 triplets over " + std::to_string(seen.size()) + " gt schemas, " + std::to_string(violations) +
                    " ground-truth rule violations; sampled gt fraction " + fmt(frac, 4) + " (target 0.40 +- 0.02)"};
}

// ---- 8 ----------------------------------------------------------------------

Outcome end_to_end_trainability() {
  const auto dir = work_dir / "smoke";
  std::filesystem::remove_all(dir);
  // eight photos (four people, two each), larger than the model input, aligned on load
  const auto corpus = write_synthetic_corpus(dir / "data", 4, 2, 96, 3);
  const auto conf = dir / "smoke.conf";
  std::ofstream(conf) << "mode = 64-smoke\n";
  const TrainConfig cfg = train_config_from(KeyValueConfig::load(conf));
  if (!cfg.sampling.self_pairs) return {false, "smoke preset is not source == target"};
  const auto data = load_aligned_corpus(corpus, cfg.generator.resolution);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = train_loop(cfg, data, dir / "run");
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const double drop = 1.0 - res.final_rec / res.rec_at_step10;

  double worst_psnr = 1e9;
  int cli_failures = 0;
  for (const auto& rec : read_corpus(corpus)) {
    const auto image = dir / "data" / rec.path;
    const auto out = dir / "swap" / rec.path;
    std::ostringstream so, se;
    const int code = cli({"swap", "--config", conf.string(), "--weights", res.generator_weights.string(), "--source",
                          image.string(), "--target", image.string(), "--out", out.string()},
                         so, se);
    if (code != 0) {
      ++cli_failures;
      continue;
    }
    const auto aligned = align_face(read_ppm(image), read_landmarks(landmarks_for(image, std::nullopt)),
                                    cfg.generator.resolution);
    worst_psnr = std::min(worst_psnr, psnr(read_ppm(out), aligned));
  }
  const bool pass = res.steps <= 2000 && res.rec_at_step10 > 0 && drop >= 0.9 && cli_failures == 0 && worst_psnr > 25.0;
  return {pass, std::to_string(res.steps) + " steps (" + fmt(minutes, 3) + " min), rec " + fmt(res.rec_at_step10) +
                    " @10 -> " + fmt(res.final_rec) + " (" + fmt(100.0 * drop, 4) + "% drop, need >= 90%); swap CLI on 8 " +
                    "training images: min PSNR " + fmt(worst_psnr, 4) + " dB > 25" +
                    (cli_failures ? ", " + std::to_string(cli_failures) + " swap failures" : "")};
}

// ---- 9 ----------------------------------------------------------------------

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.generator.resolution = 32;
  c.generator.channels = 8;
  c.generator.embedding_dim = 16;
  c.discriminator.resolution = 32;
  c.discriminator.base_channels = 4;
  c.embedder.input_size = 16;
  c.embedder.embedding_dim = 16;
  c.batch_size = 2;
  c.total_steps = 4;
  c.checkpoint_every = 2;
  c.seed = 5;
  return c;
}

Outcome determinism_and_persistence() {
  const auto dir = work_dir / "determinism";
  std::filesystem::remove_all(dir);
  Dataset data;
  for (int i = 0; i < 4; ++i) {
    const auto f = synthetic_face(32, static_cast<std::uint64_t>(i / 2), static_cast<std::uint64_t>(i));
    data.images.push_back({{"img" + std::to_string(i) + ".ppm", "id" + std::to_string(i / 2), 32}, f.image});
  }
  const auto cfg = tiny_train_config();
  std::vector<std::string> failed;

  // two fixed-seed runs
  const auto a = train_loop(cfg, data, dir / "a");
  const auto b = train_loop(cfg, data, dir / "b");
  if (file_bytes(dir / "a" / "losses.csv") != file_bytes(dir / "b" / "losses.csv")) failed.push_back("loss curves differ");
  if (file_bytes(a.generator_weights) != file_bytes(b.generator_weights)) failed.push_back("weights differ");
  if (file_bytes(a.checkpoint) != file_bytes(b.checkpoint)) failed.push_back("checkpoints differ");

  // weights: save -> load -> save
  Generator<float> g(cfg.generator, 77);
  auto state = generator_state(g);
  load_weights_into(a.generator_weights, state);
  save_weights(dir / "resaved.fswt", state);
  if (file_bytes(a.generator_weights) != file_bytes(dir / "resaved.fswt")) failed.push_back("weights round trip");

  // checkpoint: load -> save
  Trainer t(cfg, data);
  t.load_checkpoint(a.checkpoint);
  t.save_checkpoint(dir / "ck_resaved.fswt");
  if (file_bytes(a.checkpoint) != file_bytes(dir / "ck_resaved.fswt") ||
      file_bytes(a.checkpoint.string() + ".meta") != file_bytes(dir / "ck_resaved.fswt.meta")) {
    failed.push_back("checkpoint round trip");
  }

  // resume: the next 10 steps after a checkpoint are identical
  Trainer first(cfg, data);
  first.step();
  first.step();
  first.save_checkpoint(dir / "mid.fswt");
  Trainer resumed(cfg, data);
  resumed.load_checkpoint(dir / "mid.fswt");
  int identical = 0;
  for (int i = 0; i < 10; ++i) {
    const auto ra = first.step().rows(), rb = resumed.step().rows();
    bool same = true;
    for (std::size_t k = 0; k < ra.size(); ++k) same = same && ra[k].second == rb[k].second;
    identical += same;
  }
  if (identical != 10) failed.push_back("resume reproduced " + std::to_string(identical) + "/10 steps");

  return {failed.empty(), failed.empty() ? "two fixed-seed runs bit-identical (curves, weights, checkpoints); weights and "
                                           "checkpoint round trips byte-identical; resume reproduced 10/10 steps"
                                         : "failed: " + failed.front()};
}

// ---- 10 ---------------------------------------------------------------------

Outcome bench_methodology() {
  std::vector<BenchReport> reports;
  for (auto v : {Variant::baseline, Variant::wide}) {
    BenchOptions o;
    o.generator = TrainConfig::smoke().generator;
    o.generator.variant = v;
    o.runs = 100;
    o.warmup = 10;
    reports.push_back(bench(o));
  }
  write_bench_csv(work_dir / "bench.csv", reports);
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.runs_ms.size() == 100 && r.mean_ms == r.recomputed_mean() && r.embed_calls_timed == 0;
  }
  const auto& base = reports[0];
  const auto& wide = reports[1];
  return {ok && wide.mean_ms > base.mean_ms,
          "100 timed runs each at " + std::to_string(base.resolution) + "px, embedder calls in timed loop: " +
              std::to_string(base.embed_calls_timed + wide.embed_calls_timed) + "; mean latency baseline " +
              fmt(base.mean_ms, 4) + " ms < wide " + fmt(wide.mean_ms, 4) + " ms"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"AdaIN contract", adain_contract},
      {"fusion contract", fusion_contract},
      {"architecture principles", architecture_principles},
      {"size reproduction", size_reproduction},
      {"loss arithmetic", loss_arithmetic},
      {"triplet rules", triplet_rules},
      {"end-to-end trainability", end_to_end_trainability},
      {"determinism and persistence", determinism_and_persistence},
      {"bench methodology", bench_methodology},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  if (const char* env = std::getenv("LITEFS_ACCEPTANCE_DIR")) {
    work_dir = env;
  } else {
    work_dir = std::filesystem::temp_directory_path() / "litefs_acceptance";
  }
  std::filesystem::create_directories(work_dir);

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << ". " << criteria[i].first << " — "
              << o.detail << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::endl;
    std::cout.unsetf(std::ios::fixed);
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
