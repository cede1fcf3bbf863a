#include "litefs/generator.hpp"

#include <cmath>

namespace litefs {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::wide: return "wide";
    case Variant::shallow: return "shallow";
    case Variant::nofuse: return "nofuse";
    case Variant::hourglass: return "hourglass";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "wide") return Variant::wide;
  if (name == "shallow") return Variant::shallow;
  if (name == "nofuse") return Variant::nofuse;
  if (name == "hourglass" || name == "hg") return Variant::hourglass;
  throw ConfigError("unknown generator variant '" + name + "'");
}

std::string to_string(StatsMode m) { return m == StatsMode::running ? "running" : "batch"; }

StatsMode parse_stats_mode(const std::string& name) {
  if (name == "running") return StatsMode::running;
  if (name == "batch") return StatsMode::batch;
  throw ConfigError("unknown statistics mode '" + name + "'");
}

void GeneratorConfig::validate() const {
  if (channels < 8) throw ConfigError("generator channels must be >= 8");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  if (resolution < 8 || (resolution & (resolution - 1)) != 0) {
    throw ConfigError("resolution must be a power of two >= 8, got " + std::to_string(resolution));
  }
  const int min_ad = variant == Variant::shallow ? 2 : 1;
  for (int l = 0; l < 3; ++l) {
    if (identity_blocks[l] < 1) throw ConfigError("identity_blocks must be >= 1 at every scale");
    if (attribute_blocks[l] < min_ad || decoder_blocks[l] < min_ad) {
      throw ConfigError(variant == Variant::shallow
                            ? "shallow variant needs >= 2 attribute/decoder blocks per scale to remove one"
                            : "attribute/decoder blocks must be >= 1 at every scale");
    }
  }
  if (!(leaky_slope >= 0.0) || !(norm_eps > 0.0) || !(stats_momentum > 0.0 && stats_momentum <= 1.0)) {
    throw ConfigError("invalid slope / epsilon / momentum");
  }
}

std::vector<LevelPlan> plan_levels(const GeneratorConfig& cfg) {
  cfg.validate();
  const bool hourglass = cfg.variant == Variant::hourglass;
  const int shallow = cfg.variant == Variant::shallow ? 1 : 0;
  std::vector<LevelPlan> plan;
  for (std::int64_t res = cfg.resolution / 2, l = 0; res >= 1; res /= 2, ++l) {
    if (l >= 3 && !hourglass) break;
    LevelPlan p{res, cfg.channels, 0, 0, 0};
    if (cfg.variant == Variant::wide) p.channels = cfg.channels << (l + 1);
    if (l < 3) {
      p.identity_blocks = cfg.identity_blocks[l];
      p.attribute_blocks = cfg.attribute_blocks[l] - shallow;
      p.decoder_blocks = cfg.decoder_blocks[l] - shallow;
    }
    plan.push_back(p);
  }
  if (plan.size() < 3) throw ConfigError("resolution too small for three downsamples");
  return plan;
}

template <typename T>
FaceEmbedding<T> FaceEmbedding<T>::from_unit(Tensor<T> rows, double tolerance) {
  if (rows.rank() != 2) throw DimensionError("face embedding must be [B,E], got " + shape_string(rows.shape()));
  const std::int64_t e = rows.dim(1);
  for (std::int64_t b = 0; b < rows.dim(0); ++b) {
    double sq = 0;
    for (std::int64_t i = 0; i < e; ++i) sq += static_cast<double>(rows.values()[b * e + i]) * rows.values()[b * e + i];
    if (std::abs(std::sqrt(sq) - 1.0) > tolerance) {
      throw ValidationError("face embedding row " + std::to_string(b) + " has norm " + std::to_string(std::sqrt(sq)) +
                            ", expected 1");
    }
  }
  return FaceEmbedding(std::move(rows));
}

template <typename T>
FaceEmbedding<T> FaceEmbedding<T>::normalized(const Tensor<T>& rows) {
  if (rows.rank() != 2) throw DimensionError("face embedding must be [B,E], got " + shape_string(rows.shape()));
  return FaceEmbedding(normalize_rows(rows));
}

namespace {

void trace_map(const BlockContext& ctx, const std::string& label, const Shape& shape) {
  if (ctx.trace) ctx.trace->maps.push_back({label, shape});
}

}  // namespace

template <typename T>
HeaderOutput<T> encoder_header(const Tensor<T>& image, const HeaderParams<T>& p, const BlockContext& ctx) {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw DimensionError("encoder header expects [B,3,H,W], got " + shape_string(image.shape()));
  }
  HeaderOutput<T> out;
  out.full = leaky_relu(p.lift(image), ctx.slope);
  auto down = leaky_relu(p.down(resample(out.full, Resample::down2_stride)), ctx.slope);
  if (ctx.trace) {
    ++ctx.trace->identity_path_downsamples;
    ++ctx.trace->attribute_path_downsamples;
  }
  out.id = leaky_relu(p.id_branch(down), ctx.slope);
  out.attr = leaky_relu(p.attr_branch(down), ctx.slope);
  trace_map(ctx, "header.full", out.full.shape());
  trace_map(ctx, "header.id", out.id.shape());
  trace_map(ctx, "header.attr", out.attr.shape());
  return out;
}

template <typename T>
Tensor<T> adain(const Tensor<T>& f_in, const FaceEmbedding<T>& f_id, const AdaInParams<T>& p,
                const BlockContext& ctx) {
  if (f_in.rank() != 4) throw DimensionError("adain expects [B,C,H,W], got " + shape_string(f_in.shape()));
  const std::int64_t batch = f_in.dim(0), channels = f_in.dim(1);
  if (f_id.batch() != batch) throw DimensionError("adain: embedding batch does not match feature batch");
  if (f_id.dim() != p.mean_head.weight.dim(1)) throw DimensionError("adain: embedding dimension mismatch");
  if (p.mean_head.weight.dim(0) != channels) throw DimensionError("adain: FC heads do not match channel count");

  ChannelStats<T> stats;
  if (ctx.training) {
    RunningStats<T> running = p.running;  // shares storage with the model buffers
    stats = channel_stats(f_in, ctx.eps, &running);
  } else if (ctx.stats == StatsMode::batch) {
    stats = channel_stats(f_in, ctx.eps);
  } else {
    stats = running_channel_stats(p.running, ctx.eps);
  }
  auto normalized = normalize_channels(f_in, stats.mean, stats.std);
  auto mu_id = p.mean_head(f_id.rows());
  auto sigma_id = p.scale_head(f_id.rows());
  return modulate_channels(normalized, sigma_id, mu_id);
}

template <typename T>
Tensor<T> identity_block(const Tensor<T>& x_id, const FaceEmbedding<T>& f_id, const IdentityBlockParams<T>& p,
                         const BlockContext& ctx) {
  auto h = adain(x_id, f_id, p.adain, ctx);
  h = p.conv2(leaky_relu(p.conv1(h), ctx.slope));
  return ctx.fuse ? add(x_id, h) : h;
}

template <typename T>
Tensor<T> attribute_block(const Tensor<T>& x_attr, const AttributeBlockParams<T>& p, const BlockContext& ctx) {
  auto h = p.conv2(leaky_relu(p.conv1(x_attr), ctx.slope));
  return ctx.fuse ? add(x_attr, h) : h;
}

template <typename T>
Tensor<T> attention_fuse(const Tensor<T>& x_dec, const Tensor<T>& x_attr, const Conv<T>& attention, bool fuse) {
  if (x_dec.shape() != x_attr.shape()) {
    throw DimensionError("decoder block: x_dec " + shape_string(x_dec.shape()) + " vs x_attr " +
                         shape_string(x_attr.shape()));
  }
  if (!fuse) return x_dec;
  auto m = sigmoid(attention(x_dec));
  return add(x_attr, mul(m, sub(x_dec, x_attr)));
}

template <typename T>
Tensor<T> decoder_block(const Tensor<T>& x_dec, const Tensor<T>& x_attr, const DecoderBlockParams<T>& p,
                        const BlockContext& ctx) {
  auto y = attention_fuse(x_dec, x_attr, p.attention, ctx.fuse);
  auto h = p.conv2(leaky_relu(p.conv1(y), ctx.slope));
  return ctx.fuse ? add(y, h) : h;
}

template <typename T>
Tensor<T> to_rgb(const Tensor<T>& x, const Conv<T>& head) {
  return tanh(head(x));
}

template <typename T>
Generator<T>::Generator(GeneratorConfig config, std::uint64_t seed) : config_(std::move(config)), store_(seed) {
  const auto plan = plan_levels(config_);
  const std::int64_t n = config_.channels;
  const std::int64_t e = config_.embedding_dim;
  const double slope = config_.leaky_slope;
  const double residual_gain = 0.5;
  const std::size_t depth = plan.size();

  header_.lift = store_.conv("header.lift", 3, n, 3, 1, 1, 1.0, slope);
  header_.down = store_.conv("header.down", n, plan[0].channels, 3, 2, 1, 1.0, slope);
  header_.id_branch = store_.conv("header.id_branch", plan[0].channels, plan[0].channels, 3, 1, 1, 1.0, slope);
  header_.attr_branch = store_.conv("header.attr_branch", plan[0].channels, plan[0].channels, 3, 1, 1, 1.0, slope);

  levels_.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    levels_[l].resolution = plan[l].resolution;
    levels_[l].channels = plan[l].channels;
  }
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string pre = "id.L" + std::to_string(l);
    const std::int64_t c = plan[l].channels;
    if (l > 0) levels_[l].id_down = store_.conv(pre + ".down", plan[l - 1].channels, c, 3, 2, 1, 1.0, slope);
    for (int j = 0; j < plan[l].identity_blocks; ++j) {
      const std::string b = pre + ".b" + std::to_string(j);
      IdentityBlockParams<T> blk;
      blk.adain.mean_head = store_.linear(b + ".adain.mean", e, c, 0.02, 0.0);
      blk.adain.scale_head = store_.linear(b + ".adain.scale", e, c, 0.02, 1.0);
      blk.adain.running = store_.running_stats(b + ".adain", c, config_.stats_momentum);
      blk.conv1 = store_.conv(b + ".conv1", c, c, 3, 1, 1, 1.0, slope);
      blk.conv2 = store_.conv(b + ".conv2", c, c, 3, 1, 1, residual_gain, slope);
      levels_[l].identity.push_back(std::move(blk));
    }
  }
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string pre = "attr.L" + std::to_string(l);
    const std::int64_t c = plan[l].channels;
    if (l > 0) levels_[l].attr_down = store_.conv(pre + ".down", plan[l - 1].channels, c, 3, 2, 1, 1.0, slope);
    for (int j = 0; j < plan[l].attribute_blocks; ++j) {
      const std::string b = pre + ".b" + std::to_string(j);
      AttributeBlockParams<T> blk;
      blk.conv1 = store_.conv(b + ".conv1", c, c, 3, 1, 1, 1.0, slope);
      blk.conv2 = store_.conv(b + ".conv2", c, c, 3, 1, 1, residual_gain, slope);
      levels_[l].attribute.push_back(std::move(blk));
    }
  }
  for (std::size_t k = depth; k-- > 0;) {
    const std::string pre = "dec.L" + std::to_string(k);
    const std::int64_t c = plan[k].channels;
    if (k + 1 < depth) levels_[k].up = store_.conv(pre + ".up", plan[k + 1].channels, c, 3, 1, 1, 1.0, slope);
    for (int j = 0; j < plan[k].decoder_blocks; ++j) {
      const std::string b = pre + ".b" + std::to_string(j);
      DecoderBlockParams<T> blk;
      blk.attention = store_.conv(b + ".attention", c, c, 3, 1, 1, 1.0, slope);
      blk.conv1 = store_.conv(b + ".conv1", c, c, 3, 1, 1, 1.0, slope);
      blk.conv2 = store_.conv(b + ".conv2", c, c, 3, 1, 1, residual_gain, slope);
      levels_[k].decoder.push_back(std::move(blk));
    }
    if (k <= 1) levels_[k].rgb = store_.conv(pre + ".rgb", c, 3, 3, 1, 1, 1.0, 1.0);
  }
  full_up_ = store_.conv("dec.full.up", plan[0].channels, n, 3, 1, 1, 1.0, slope);
  full_rgb_ = store_.conv("dec.full.rgb", n, 3, 3, 1, 1, 1.0, 1.0);
}

template <typename T>
std::vector<Tensor<T>> Generator<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& p : store_.parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
ParamCount Generator<T>::param_count() const {
  ParamCount pc;
  for (const auto& p : store_.parameters()) pc.count += p.tensor.numel();
  pc.fp32_bytes = 4 * pc.count;
  return pc;
}

template <typename T>
MultiScaleOutput<T> Generator<T>::forward(const Tensor<T>& target, const FaceEmbedding<T>& f_id,
                                          ForwardTrace* trace) const {
  const std::int64_t r = config_.resolution;
  if (target.rank() != 4 || target.dim(1) != 3 || target.dim(2) != r || target.dim(3) != r) {
    throw DimensionError("generator expects [B,3," + std::to_string(r) + "," + std::to_string(r) + "], got " +
                         shape_string(target.shape()));
  }
  BlockContext ctx;
  ctx.slope = config_.leaky_slope;
  ctx.fuse = config_.variant != Variant::nofuse;
  ctx.training = training_;
  ctx.stats = config_.inference_stats;
  ctx.eps = config_.norm_eps;
  ctx.trace = trace;

  const auto head = encoder_header(target, header_, ctx);
  const std::size_t depth = levels_.size();

  std::vector<Tensor<T>> id_out(depth);
  Tensor<T> x = head.id;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& lv = levels_[l];
    if (lv.id_down) {
      x = leaky_relu((*lv.id_down)(resample(x, Resample::down2_stride)), ctx.slope);
      if (trace) ++trace->identity_path_downsamples;
      trace_map(ctx, "id.L" + std::to_string(l) + ".down", x.shape());
    }
    for (std::size_t j = 0; j < lv.identity.size(); ++j) {
      x = identity_block(x, f_id, lv.identity[j], ctx);
      trace_map(ctx, "id.L" + std::to_string(l) + ".b" + std::to_string(j), x.shape());
    }
    id_out[l] = x;
  }

  std::vector<std::vector<Tensor<T>>> attr_feats(depth);
  Tensor<T> a = head.attr;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& lv = levels_[l];
    if (lv.attr_down) {
      a = leaky_relu((*lv.attr_down)(resample(a, Resample::down2_stride)), ctx.slope);
      if (trace) ++trace->attribute_path_downsamples;
      trace_map(ctx, "attr.L" + std::to_string(l) + ".down", a.shape());
    }
    for (std::size_t j = 0; j < lv.attribute.size(); ++j) {
      a = attribute_block(a, lv.attribute[j], ctx);
      attr_feats[l].push_back(a);
      trace_map(ctx, "attr.L" + std::to_string(l) + ".b" + std::to_string(j), a.shape());
    }
    if (attr_feats[l].empty()) attr_feats[l].push_back(a);
  }

  MultiScaleOutput<T> out;
  Tensor<T> d = id_out[depth - 1];
  for (std::size_t k = depth; k-- > 0;) {
    const auto& lv = levels_[k];
    if (lv.up) {
      d = leaky_relu((*lv.up)(resample(d, Resample::up2_nearest)), ctx.slope);
      if (trace) ++trace->upsamples;
      if (ctx.fuse) d = add(d, id_out[k]);
      trace_map(ctx, "dec.L" + std::to_string(k) + ".up", d.shape());
    }
    const auto& feats = attr_feats[k];
    const std::size_t nf = feats.size();
    for (std::size_t j = 0; j < lv.decoder.size(); ++j) {
      const std::size_t pick = j < nf ? nf - 1 - j : 0;  // deepest attribute map first
      d = decoder_block(d, feats[pick], lv.decoder[j], ctx);
      trace_map(ctx, "dec.L" + std::to_string(k) + ".b" + std::to_string(j), d.shape());
    }
    if (lv.rgb) out.images[k == 1 ? quarter : half] = to_rgb(d, *lv.rgb);
  }
  d = leaky_relu(full_up_(resample(d, Resample::up2_nearest)), ctx.slope);
  if (trace) ++trace->upsamples;
  if (ctx.fuse) d = add(d, head.full);
  trace_map(ctx, "dec.full.up", d.shape());
  out.images[full] = to_rgb(d, full_rgb_);
  return out;
}

template <typename T>
Generator<T> build_variant(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  return Generator<T>(config, seed);
}

#define LITEFS_INSTANTIATE_GENERATOR(T)                                                                          \
  template class FaceEmbedding<T>;                                                                             \
  template class Generator<T>;                                                                                 \
  template Generator<T> build_variant<T>(const GeneratorConfig&, std::uint64_t);                               \
  template HeaderOutput<T> encoder_header<T>(const Tensor<T>&, const HeaderParams<T>&, const BlockContext&);   \
  template Tensor<T> adain<T>(const Tensor<T>&, const FaceEmbedding<T>&, const AdaInParams<T>&,                 \
                              const BlockContext&);                                                            \
  template Tensor<T> identity_block<T>(const Tensor<T>&, const FaceEmbedding<T>&, const IdentityBlockParams<T>&, \
                                       const BlockContext&);                                                   \
  template Tensor<T> attribute_block<T>(const Tensor<T>&, const AttributeBlockParams<T>&, const BlockContext&); \
  template Tensor<T> attention_fuse<T>(const Tensor<T>&, const Tensor<T>&, const Conv<T>&, bool);              \
  template Tensor<T> decoder_block<T>(const Tensor<T>&, const Tensor<T>&, const DecoderBlockParams<T>&,        \
                                      const BlockContext&);                                                    \
  template Tensor<T> to_rgb<T>(const Tensor<T>&, const Conv<T>&);

LITEFS_INSTANTIATE_GENERATOR(float)
LITEFS_INSTANTIATE_GENERATOR(double)

}  // namespace litefs
