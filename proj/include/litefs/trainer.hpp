#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "litefs/adam.hpp"
#include "litefs/config.hpp"
#include "litefs/discriminator.hpp"
#include "litefs/generator.hpp"
#include "litefs/losses.hpp"
#include "litefs/perception.hpp"
#include "litefs/triplet_forge.hpp"

namespace litefs {

enum class ExtractorKind { conv, identity };

struct TrainConfig {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  LossWeights weights;
  SampleConfig sampling;
  AdamConfig adam_g;
  AdamConfig adam_d;
  std::int64_t batch_size = 64;
  std::int64_t total_steps = 1000;
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::int64_t sample_every = 0;      // 0: only the final sample grid
  std::uint64_t seed = 1;
  std::array<bool, 3> active_scales{true, true, true};  // losses on the 64/128/256 heads
  bool train_discriminator = true;
  FaceEmbedderSpec embedder;
  ExtractorKind extractor = ExtractorKind::conv;
  std::filesystem::path extractor_weights;
  // stop early once the mean reconstruction loss of the last 10 steps drops
  // below this value (0 disables)
  double early_stop_rec = 0.0;

  void validate() const;
  // Reduced 64x64 configuration used by the overfit smoke run.
  static TrainConfig smoke();
};

// Reads every training/model key from a flat config; unknown keys are left
// for the caller's require_all_used().
TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig base = {});

// Real images for the three critics: the target and its 2x/4x area downsamples.
template <typename T>
std::array<Tensor<T>, 3> real_pyramid(const Tensor<T>& target);

// Every generator-side loss term for one batch (inactive scales give zeros).
template <typename T>
GeneratorLossParts<T> generator_loss_parts(const MultiScaleOutput<T>& out, const FaceEmbedding<T>& f_src,
                                           const Tensor<T>& target, const Tensor<T>& gt, std::span<const T> has_gt,
                                           const Discriminator<T>& disc, const FaceEmbedder<T>& embedder,
                                           const FeatureExtractor<T>& extractor,
                                           const std::array<bool, 3>& active_scales);

class Trainer {
 public:
  Trainer(TrainConfig config, Dataset data);

  // Samples a batch with the trainer's RNG and runs one train_step.
  LossReport step();
  // One discriminator update followed by one generator update.
  LossReport train_step(const Batch& batch);

  std::int64_t steps_done() const noexcept { return step_; }
  const TrainConfig& config() const noexcept { return config_; }
  const Dataset& data() const noexcept { return data_; }
  Generator<float>& generator() noexcept { return gen_; }
  Discriminator<float>& discriminator() noexcept { return disc_; }
  const FaceEmbedder<float>& embedder() const noexcept { return *embedder_; }
  const AdamState<float>& adam_g() const noexcept { return adam_g_; }
  const AdamState<float>& adam_d() const noexcept { return adam_d_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

  // Eval-mode forward of up to four batch samples, tiled as rows
  // source / target / 64 / 128 / 256.
  Tensor<float> sample_grid(const Batch& batch);

 private:
  TrainConfig config_;
  Dataset data_;
  Generator<float> gen_;
  Discriminator<float> disc_;
  std::unique_ptr<FaceEmbedder<float>> embedder_;
  std::unique_ptr<FeatureExtractor<float>> extractor_;
  AdamState<float> adam_g_;
  AdamState<float> adam_d_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
};

// Generator parameters plus running statistics, as stored in inference weights.
template <typename T>
std::vector<NamedTensor<T>> generator_state(const Generator<T>& gen);

struct TrainResult {
  std::int64_t steps = 0;        // total steps completed (including resumed ones)
  double rec_at_step10 = 0.0;    // reconstruction loss reported at step 10
  double final_rec = 0.0;        // mean of the last ten steps
  std::filesystem::path checkpoint;
  std::filesystem::path generator_weights;
};

// Runs training into out_dir: losses.csv (step,term,value), periodic and final
// checkpoints, sample grids under samples/, generator.fswt for inference.
TrainResult train_loop(const TrainConfig& config, const Dataset& data, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt);

}  // namespace litefs
