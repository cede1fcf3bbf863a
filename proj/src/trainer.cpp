#include "litefs/trainer.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "litefs/image_io.hpp"
#include "litefs/weights_io.hpp"

namespace litefs {

namespace {

constexpr int checkpoint_version = 1;

std::array<bool, 3> parse_scales(const std::vector<double>& list) {
  std::array<bool, 3> on{false, false, false};
  for (double v : list) {
    if (v == 64) on[quarter] = true;
    else if (v == 128) on[half] = true;
    else if (v == 256) on[full] = true;
    else throw ConfigError("active_scales entries must be 64, 128 or 256");
  }
  return on;
}

std::array<int, 3> int3(const KeyValueConfig& kv, const std::string& key, std::array<int, 3> fallback) {
  const auto v = kv.get_doubles(key, {double(fallback[0]), double(fallback[1]), double(fallback[2])});
  if (v.size() != 3) throw ConfigError(key + " needs three comma-separated values");
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

std::array<double, 3> double3(const KeyValueConfig& kv, const std::string& key, std::array<double, 3> fallback) {
  const auto v = kv.get_doubles(key, {fallback[0], fallback[1], fallback[2]});
  if (v.size() != 3) throw ConfigError(key + " needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

void push_moments(std::vector<NamedTensor<float>>& out, const std::string& prefix, const AdamState<float>& st,
                  const std::vector<NamedTensor<float>>& params) {
  for (std::size_t i = 0; i < st.first_moment.size(); ++i) {
    out.push_back({prefix + ".m/" + params[i].name, st.first_moment[i]});
    out.push_back({prefix + ".v/" + params[i].name, st.second_moment[i]});
  }
}

}  // namespace

void TrainConfig::validate() const {
  generator.validate();
  discriminator.validate();
  weights.validate();
  sampling.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (checkpoint_every < 0 || sample_every < 0) throw ConfigError("checkpoint/sample intervals must be >= 0");
  if (discriminator.resolution != generator.resolution) {
    throw ConfigError("discriminator and generator resolutions differ");
  }
  if (!(adam_g.lr > 0.0) || !(adam_d.lr > 0.0)) throw ConfigError("learning rates must be positive");
}

TrainConfig TrainConfig::smoke() {
  TrainConfig c;
  c.generator.resolution = 64;
  c.discriminator.resolution = 64;
  c.discriminator.base_channels = 16;
  c.batch_size = 8;
  c.total_steps = 2000;
  c.sampling.self_pairs = true;
  c.adam_g.lr = 5e-4;
  c.adam_d.lr = 1e-4;
  c.early_stop_rec = 0.001;
  return c;
}

TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig c) {
  const std::string mode = kv.get_string("mode", "");
  if (mode == "64-smoke" || mode == "smoke") {
    c = TrainConfig::smoke();
  } else if (!mode.empty() && mode != "256") {
    throw ConfigError("mode must be 256 or 64-smoke");
  }
  auto& g = c.generator;
  g.channels = kv.get_int("channels", g.channels);
  g.embedding_dim = kv.get_int("embedding_dim", g.embedding_dim);
  g.resolution = kv.get_int("resolution", g.resolution);
  g.variant = parse_variant(kv.get_string("variant", to_string(g.variant)));
  g.identity_blocks = int3(kv, "identity_blocks", g.identity_blocks);
  g.attribute_blocks = int3(kv, "attribute_blocks", g.attribute_blocks);
  g.decoder_blocks = int3(kv, "decoder_blocks", g.decoder_blocks);
  g.inference_stats = parse_stats_mode(kv.get_string("inference_stats", to_string(g.inference_stats)));
  g.leaky_slope = kv.get_double("leaky_slope", g.leaky_slope);
  g.norm_eps = kv.get_double("norm_eps", g.norm_eps);
  g.stats_momentum = kv.get_double("stats_momentum", g.stats_momentum);

  c.discriminator.base_channels = kv.get_int("d_channels", c.discriminator.base_channels);
  c.discriminator.resolution = g.resolution;

  auto& w = c.weights;
  w.alpha_adv = double3(kv, "alpha_adv", w.alpha_adv);
  w.beta_id = double3(kv, "beta_id", w.beta_id);
  w.lambda_adv = kv.get_double("lambda_adv", w.lambda_adv);
  w.lambda_id = kv.get_double("lambda_id", w.lambda_id);
  w.lambda_vgg = kv.get_double("lambda_vgg", w.lambda_vgg);
  w.lambda_rec = kv.get_double("lambda_rec", w.lambda_rec);

  const double lr = kv.get_double("lr", -1.0);
  if (lr > 0) c.adam_g.lr = c.adam_d.lr = lr;
  c.adam_g.lr = kv.get_double("lr_g", c.adam_g.lr);
  c.adam_d.lr = kv.get_double("lr_d", c.adam_d.lr);
  c.adam_g.beta1 = c.adam_d.beta1 = kv.get_double("beta1", c.adam_g.beta1);
  c.adam_g.beta2 = c.adam_d.beta2 = kv.get_double("beta2", c.adam_g.beta2);

  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.total_steps = kv.get_int("total_steps", c.total_steps);
  c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
  c.sample_every = kv.get_int("sample_every", c.sample_every);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.train_discriminator = kv.get_bool("train_discriminator", c.train_discriminator);
  c.early_stop_rec = kv.get_double("early_stop_rec", c.early_stop_rec);
  if (kv.has("active_scales")) c.active_scales = parse_scales(kv.get_doubles("active_scales", {}));

  auto& s = c.sampling;
  s.triplet_fraction = kv.get_double("triplet_fraction", s.triplet_fraction);
  if (kv.has("schema_weights")) {
    const auto v = kv.get_doubles("schema_weights", {});
    if (v.size() != 5) throw ConfigError("schema_weights needs five values");
    for (int i = 0; i < 5; ++i) s.schema_weights[i] = v[i];
  }
  s.edit_magnitude = kv.get_double("edit_magnitude", s.edit_magnitude);
  s.self_pairs = kv.get_bool("self_pairs", s.self_pairs);

  c.embedder.input_size = kv.get_int("embedder_input", c.embedder.input_size);
  c.embedder.embedding_dim = g.embedding_dim;
  const std::string ew = kv.get_string("embedder_weights", "");
  if (!ew.empty()) {
    c.embedder.source = WeightSource::file;
    c.embedder.weights_path = ew;
  }
  const std::string ex = kv.get_string("extractor", c.extractor == ExtractorKind::conv ? "conv" : "identity");
  if (ex == "conv") c.extractor = ExtractorKind::conv;
  else if (ex == "identity") c.extractor = ExtractorKind::identity;
  else throw ConfigError("extractor must be conv or identity");
  c.extractor_weights = kv.get_string("extractor_weights", c.extractor_weights.string());
  c.validate();
  return c;
}

template <typename T>
std::array<Tensor<T>, 3> real_pyramid(const Tensor<T>& target) {
  NoTapeScope off;
  std::array<Tensor<T>, 3> out;
  out[full] = target;
  out[half] = avg_pool2(target);
  out[quarter] = avg_pool2(out[half]);
  return out;
}

template <typename T>
GeneratorLossParts<T> generator_loss_parts(const MultiScaleOutput<T>& out, const FaceEmbedding<T>& f_src,
                                           const Tensor<T>& target, const Tensor<T>& gt, std::span<const T> has_gt,
                                           const Discriminator<T>& disc, const FaceEmbedder<T>& embedder,
                                           const FeatureExtractor<T>& extractor,
                                           const std::array<bool, 3>& active_scales) {
  GeneratorLossParts<T> p;
  for (std::size_t s = 0; s < 3; ++s) {
    if (active_scales[s]) {
      p.adv[s] = hinge_g_loss(disc.forward(out[s], static_cast<ScaleIndex>(s)));
      p.id[s] = identity_term(out[s], f_src, embedder);
    } else {
      p.adv[s] = Tensor<T>::scalar(T{0});
      p.id[s] = Tensor<T>::scalar(T{0});
    }
  }
  p.vgg = attribute_loss(out[full], target, extractor);
  bool any_gt = false;
  for (T v : has_gt) any_gt = any_gt || v != T{0};
  p.rec = any_gt ? masked_reconstruction_loss(out[full], gt, has_gt) : Tensor<T>::scalar(T{0});
  return p;
}

template <typename T>
std::vector<NamedTensor<T>> generator_state(const Generator<T>& gen) {
  auto out = gen.parameters();
  for (const auto& b : gen.buffers()) out.push_back(b);
  return out;
}

Trainer::Trainer(TrainConfig config, Dataset data)
    : config_(std::move(config)),
      data_(std::move(data)),
      gen_((config_.validate(), config_.generator), config_.seed),
      disc_(config_.discriminator, config_.seed + 1),
      adam_g_(config_.adam_g),
      adam_d_(config_.adam_d),
      rng_(config_.seed) {
  if (data_.images.empty()) throw UsageError("training needs a non-empty dataset");
  for (const auto& img : data_.images) {
    if (img.pixels.dim(2) != config_.generator.resolution || img.pixels.dim(3) != config_.generator.resolution) {
      throw DimensionError("dataset image " + img.record.path + " is not " +
                           std::to_string(config_.generator.resolution) + " pixels square");
    }
  }
  FaceEmbedderSpec spec = config_.embedder;
  spec.embedding_dim = config_.generator.embedding_dim;
  embedder_ = make_embedder<float>(spec);
  if (config_.extractor == ExtractorKind::identity) {
    extractor_ = std::make_unique<IdentityExtractor<float>>();
  } else if (config_.extractor_weights.empty()) {
    extractor_ = std::make_unique<ConvFeatureExtractor<float>>();
  } else {
    extractor_ = std::make_unique<ConvFeatureExtractor<float>>(config_.extractor_weights);
  }
}

LossReport Trainer::step() {
  const Batch batch = sample_batch(data_, config_.batch_size, config_.sampling, rng_);
  return train_step(batch);
}

LossReport Trainer::train_step(const Batch& batch) {
  auto g_params = gen_.parameter_tensors();
  auto d_params = disc_.parameter_tensors();
  zero_grads<float>(g_params);
  zero_grads<float>(d_params);
  LossReport report;
  try {
    gen_.set_training(true);
    FaceEmbedding<float> f_src = [&] {
      NoTapeScope off;
      return embedder_->embed(batch.source);
    }();
    const auto reals = real_pyramid(batch.target);

    Tape g_tape;
    TapeScope g_scope(g_tape);
    const auto out = gen_.forward(batch.target, f_src);

    {  // discriminator phase on detached fakes
      Tape d_tape;
      TapeScope d_scope(d_tape);
      Tensor<float> total_d;
      for (std::size_t s = 0; s < 3; ++s) {
        if (!config_.active_scales[s]) continue;
        const auto scale = static_cast<ScaleIndex>(s);
        auto l = hinge_d_loss(disc_.forward(reals[s], scale), disc_.forward(out[s].detach(), scale));
        report.d[s] = l.item();
        total_d = total_d.defined() ? add(total_d, l) : l;
      }
      if (total_d.defined()) {
        report.total_d = total_d.item();
        if (config_.train_discriminator) {
          reverse_accumulate(d_tape, total_d);
          adam_step<float>(d_params, adam_d_);
        }
      }
      zero_grads<float>(d_params);
    }

    const auto parts = generator_loss_parts<float>(out, f_src, batch.target, batch.gt, batch.has_gt, disc_, *embedder_,
                                                   *extractor_, config_.active_scales);
    auto [total, g_report] = total_generator_loss(parts, config_.weights);
    reverse_accumulate(g_tape, total);
    zero_grads<float>(d_params);  // the generator loss also reaches the critics
    adam_step<float>(g_params, adam_g_);
    zero_grads<float>(g_params);

    g_report.d = report.d;
    g_report.total_d = report.total_d;
    report = g_report;
  } catch (const NumericError& e) {
    gen_.set_training(false);
    throw NumericError("training step " + std::to_string(step_ + 1) + ": " + e.what());
  }
  gen_.set_training(false);
  ++step_;
  return report;
}

Tensor<float> Trainer::sample_grid(const Batch& batch) {
  NoTapeScope off;
  const std::int64_t n = std::min<std::int64_t>(4, batch.source.dim(0));
  const std::int64_t r = batch.source.dim(2);
  const std::int64_t per = 3 * r * r;
  auto head = [&](const Tensor<float>& t) {
    Tensor<float> out(Shape{n, 3, r, r});
    std::copy(t.values().begin(), t.values().begin() + n * per, out.mutable_values().begin());
    return out;
  };
  const auto src = head(batch.source), tgt = head(batch.target);
  const bool was = gen_.training();
  gen_.set_training(false);
  const auto out = gen_.forward(tgt, embedder_->embed(src));
  gen_.set_training(was);
  return image_grid({src, tgt, out[quarter], out[half], out[full]});
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::vector<NamedTensor<float>> all;
  for (const auto& t : generator_state(gen_)) all.push_back({"G/" + t.name, t.tensor});
  for (const auto& t : disc_.parameters()) all.push_back({"D/" + t.name, t.tensor});
  push_moments(all, "adamG", adam_g_, gen_.parameters());
  push_moments(all, "adamD", adam_d_, disc_.parameters());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_weights(path, all);

  std::ostringstream rng_state;
  rng_state << rng_;
  std::ofstream meta(path.string() + ".meta", std::ios::trunc);
  if (!meta) throw IoError("cannot write checkpoint metadata for " + path.string());
  meta << "# training checkpoint metadata\n"
       << "version=" << checkpoint_version << "\n"
       << "step=" << step_ << "\n"
       << "variant=" << to_string(config_.generator.variant) << "\n"
       << "resolution=" << config_.generator.resolution << "\n"
       << "channels=" << config_.generator.channels << "\n"
       << "adam_g_step=" << adam_g_.step << "\n"
       << "adam_d_step=" << adam_d_.step << "\n"
       << "adam_g_moments=" << adam_g_.first_moment.size() << "\n"
       << "adam_d_moments=" << adam_d_.first_moment.size() << "\n"
       << "rng=" << rng_state.str() << "\n";
  if (!meta) throw IoError("write failed for " + path.string() + ".meta");
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  const auto meta_path = std::filesystem::path(path.string() + ".meta");
  if (!std::filesystem::exists(meta_path)) throw LoadError("checkpoint metadata missing: " + meta_path.string());
  const auto meta = KeyValueConfig::load(meta_path);
  const auto version = meta.get_int("version", -1);
  if (version != checkpoint_version) {
    throw LoadError(path.string() + ": checkpoint version " + std::to_string(version) + " is not supported");
  }
  if (meta.get_string("variant", "") != to_string(config_.generator.variant) ||
      meta.get_int("resolution", -1) != config_.generator.resolution ||
      meta.get_int("channels", -1) != config_.generator.channels) {
    throw LoadError(path.string() + ": checkpoint was written for a different generator configuration");
  }
  const auto g_moments = meta.get_int("adam_g_moments", 0);
  const auto d_moments = meta.get_int("adam_d_moments", 0);

  const auto records = read_weights(path);
  std::vector<NamedTensor<float>> targets;
  for (const auto& t : generator_state(gen_)) targets.push_back({"G/" + t.name, t.tensor});
  for (const auto& t : disc_.parameters()) targets.push_back({"D/" + t.name, t.tensor});
  AdamState<float> g_state(config_.adam_g), d_state(config_.adam_d);
  auto make_moments = [&](AdamState<float>& st, std::int64_t count, const std::vector<NamedTensor<float>>& params,
                          const std::string& prefix) {
    if (count == 0) return;
    if (count != static_cast<std::int64_t>(params.size())) throw LoadError(path.string() + ": optimizer state size mismatch");
    for (const auto& p : params) {
      st.first_moment.emplace_back(p.tensor.shape(), 0.0f);
      st.second_moment.emplace_back(p.tensor.shape(), 0.0f);
      targets.push_back({prefix + ".m/" + p.name, st.first_moment.back()});
      targets.push_back({prefix + ".v/" + p.name, st.second_moment.back()});
    }
  };
  make_moments(g_state, g_moments, gen_.parameters(), "adamG");
  make_moments(d_state, d_moments, disc_.parameters(), "adamD");
  std::mt19937_64 rng;
  std::istringstream rng_in(meta.get_string("rng", ""));
  if (!(rng_in >> rng)) throw LoadError(path.string() + ": corrupt RNG state");
  const auto step = meta.get_int("step", -1);
  g_state.step = meta.get_int("adam_g_step", 0);
  d_state.step = meta.get_int("adam_d_step", 0);
  meta.require_all_used();
  if (step < 0) throw LoadError(path.string() + ": missing step");

  assign_records(records, targets, true, path.string());
  adam_g_ = std::move(g_state);
  adam_d_ = std::move(d_state);
  rng_ = rng;
  step_ = step;
}

TrainResult train_loop(const TrainConfig& config, const Dataset& data, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume) {
  std::filesystem::create_directories(out_dir / "samples");
  Trainer trainer(config, data);
  if (resume) trainer.load_checkpoint(*resume);
  TrainResult result;

  const auto csv_path = out_dir / "losses.csv";
  const bool append = resume.has_value() && std::filesystem::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  if (!append) csv << "step,term,value\n";
  csv.precision(9);

  // Fixed preview batch from its own RNG so previews do not perturb training.
  std::mt19937_64 preview_rng(config.seed ^ 0x5A5A5A5Aull);
  const Batch preview = sample_batch(trainer.data(), std::min<std::int64_t>(4, config.batch_size), config.sampling,
                                     preview_rng);
  auto write_sample = [&](std::int64_t step) {
    write_ppm(out_dir / "samples" / ("step_" + std::to_string(step) + ".ppm"), trainer.sample_grid(preview));
  };

  std::vector<double> recent;
  while (trainer.steps_done() < config.total_steps) {
    const LossReport r = trainer.step();
    const std::int64_t step = trainer.steps_done();
    for (const auto& [term, value] : r.rows()) csv << step << ',' << term << ',' << value << '\n';
    if (step == 10) result.rec_at_step10 = r.rec;
    recent.push_back(r.rec);
    if (recent.size() > 10) recent.erase(recent.begin());
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      trainer.save_checkpoint(out_dir / ("checkpoint_" + std::to_string(step) + ".fswt"));
    }
    if (config.sample_every > 0 && step % config.sample_every == 0) write_sample(step);
    if (config.early_stop_rec > 0.0 && recent.size() == 10) {
      double mean = 0.0;
      for (double v : recent) mean += v;
      if (mean / 10.0 < config.early_stop_rec) break;
    }
  }
  csv.flush();
  if (!csv) throw IoError("write failed for " + csv_path.string());

  double mean = 0.0;
  for (double v : recent) mean += v;
  result.final_rec = recent.empty() ? 0.0 : mean / static_cast<double>(recent.size());
  result.steps = trainer.steps_done();
  result.checkpoint = out_dir / "checkpoint_final.fswt";
  trainer.save_checkpoint(result.checkpoint);
  result.generator_weights = out_dir / "generator.fswt";
  save_weights(result.generator_weights, generator_state(trainer.generator()));
  write_sample(result.steps);
  return result;
}

template std::array<Tensor<float>, 3> real_pyramid<float>(const Tensor<float>&);
template std::array<Tensor<double>, 3> real_pyramid<double>(const Tensor<double>&);
template GeneratorLossParts<float> generator_loss_parts<float>(const MultiScaleOutput<float>&,
                                                               const FaceEmbedding<float>&, const Tensor<float>&,
                                                               const Tensor<float>&, std::span<const float>,
                                                               const Discriminator<float>&,
                                                               const FaceEmbedder<float>&,
                                                               const FeatureExtractor<float>&,
                                                               const std::array<bool, 3>&);
template GeneratorLossParts<double> generator_loss_parts<double>(const MultiScaleOutput<double>&,
                                                                 const FaceEmbedding<double>&, const Tensor<double>&,
                                                                 const Tensor<double>&, std::span<const double>,
                                                                 const Discriminator<double>&,
                                                                 const FaceEmbedder<double>&,
                                                                 const FeatureExtractor<double>&,
                                                                 const std::array<bool, 3>&);
template std::vector<NamedTensor<float>> generator_state<float>(const Generator<float>&);
template std::vector<NamedTensor<double>> generator_state<double>(const Generator<double>&);

}  // namespace litefs
