#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "litefs/layers.hpp"
#include "litefs/ops.hpp"
#include "litefs/tensor.hpp"

namespace litefs {

enum class Variant { baseline, wide, shallow, nofuse, hourglass };
enum class StatsMode { running, batch };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);  // ConfigError on unknown names
std::string to_string(StatsMode m);
StatsMode parse_stats_mode(const std::string& name);

// Per-scale block counts are ordered finest to coarsest (R/2, R/4, R/8).
// Defaults are the calibrated baseline: 2,550,985 parameters (10.20 MB fp32).
struct GeneratorConfig {
  std::int64_t channels = 64;
  std::int64_t embedding_dim = 512;
  std::int64_t resolution = 256;
  std::array<int, 3> identity_blocks{1, 1, 3};
  std::array<int, 3> attribute_blocks{2, 2, 4};
  std::array<int, 3> decoder_blocks{2, 2, 4};
  Variant variant = Variant::baseline;
  StatsMode inference_stats = StatsMode::running;
  double leaky_slope = 0.2;
  double norm_eps = 1e-5;
  double stats_momentum = 0.1;

  void validate() const;
};

// Unit-norm identity vectors, one row per sample.
template <typename T>
class FaceEmbedding {
 public:
  // Validates every row has L2 norm 1 within `tolerance` (ValidationError).
  static FaceEmbedding from_unit(Tensor<T> rows, double tolerance = 1e-5);
  // Normalizes rows (differentiably when recording).
  static FaceEmbedding normalized(const Tensor<T>& rows);

  const Tensor<T>& rows() const noexcept { return rows_; }
  std::int64_t batch() const { return rows_.dim(0); }
  std::int64_t dim() const { return rows_.dim(1); }

 private:
  explicit FaceEmbedding(Tensor<T> rows) : rows_(std::move(rows)) {}
  Tensor<T> rows_;
};

enum ScaleIndex : std::size_t { quarter = 0, half = 1, full = 2 };

// RGB outputs at R/4, R/2 and R (64/128/256 for the default resolution).
template <typename T>
struct MultiScaleOutput {
  std::array<Tensor<T>, 3> images;
  const Tensor<T>& operator[](std::size_t s) const { return images[s]; }
};

// Optional forward-pass instrumentation for structural checks.
struct ForwardTrace {
  struct Map {
    std::string label;
    Shape shape;
  };
  std::vector<Map> maps;  // every feature map between the header and the RGB heads
  int identity_path_downsamples = 0;
  int attribute_path_downsamples = 0;
  int upsamples = 0;
};

// Settings shared by the block functions during one forward pass.
struct BlockContext {
  double slope = 0.2;
  bool fuse = true;
  bool training = false;
  StatsMode stats = StatsMode::running;
  double eps = 1e-5;
  ForwardTrace* trace = nullptr;
};

template <typename T>
struct HeaderParams {
  Conv<T> lift;         // RGB -> N at full resolution
  Conv<T> down;         // stride-2, first of the three downsamples
  Conv<T> id_branch;    // output feeding the identity encoder
  Conv<T> attr_branch;  // output feeding the attribute encoder
};

template <typename T>
struct HeaderOutput {
  Tensor<T> full;  // lifted full-resolution map, summed back in at the last decoder stage
  Tensor<T> id;
  Tensor<T> attr;
};

template <typename T>
struct AdaInParams {
  Linear<T> mean_head;   // E -> C, predicts mu_id
  Linear<T> scale_head;  // E -> C, predicts sigma_id
  RunningStats<T> running;
};

template <typename T>
struct IdentityBlockParams {
  AdaInParams<T> adain;
  Conv<T> conv1, conv2;
};

template <typename T>
struct AttributeBlockParams {
  Conv<T> conv1, conv2;
};

template <typename T>
struct DecoderBlockParams {
  Conv<T> attention;  // produces the attention map M through a sigmoid
  Conv<T> conv1, conv2;
};

template <typename T>
HeaderOutput<T> encoder_header(const Tensor<T>& image, const HeaderParams<T>& p, const BlockContext& ctx);

// f_out = (f_in - mu) / sigma * sigma_id + mu_id with (mu_id, sigma_id) from the
// embedding through the two FC heads; (mu, sigma) are batch statistics when
// training or in batch mode, otherwise the accumulated running statistics.
template <typename T>
Tensor<T> adain(const Tensor<T>& f_in, const FaceEmbedding<T>& f_id, const AdaInParams<T>& p,
                const BlockContext& ctx);

template <typename T>
Tensor<T> identity_block(const Tensor<T>& x_id, const FaceEmbedding<T>& f_id, const IdentityBlockParams<T>& p,
                         const BlockContext& ctx);

template <typename T>
Tensor<T> attribute_block(const Tensor<T>& x_attr, const AttributeBlockParams<T>& p, const BlockContext& ctx);

// y_att = M * x_dec + (1 - M) * x_attr with M = sigmoid(conv(x_dec)), followed by
// a residual conv pair. Without fusion M is fixed to 1 and no residual is added.
template <typename T>
Tensor<T> decoder_block(const Tensor<T>& x_dec, const Tensor<T>& x_attr, const DecoderBlockParams<T>& p,
                        const BlockContext& ctx);

// The fused map y_att alone, exposed for the attention contract checks.
template <typename T>
Tensor<T> attention_fuse(const Tensor<T>& x_dec, const Tensor<T>& x_attr, const Conv<T>& attention, bool fuse);

template <typename T>
Tensor<T> to_rgb(const Tensor<T>& x, const Conv<T>& head);

struct ParamCount {
  std::int64_t count = 0;
  std::int64_t fp32_bytes = 0;
  double megabytes() const { return static_cast<double>(fp32_bytes) / 1e6; }
};

// One encoder/decoder scale of the generator.
template <typename T>
struct Level {
  std::int64_t resolution = 0;
  std::int64_t channels = 0;
  std::optional<Conv<T>> id_down;    // absent on the first level (the header downsamples)
  std::optional<Conv<T>> attr_down;
  std::vector<IdentityBlockParams<T>> identity;
  std::vector<AttributeBlockParams<T>> attribute;
  std::vector<DecoderBlockParams<T>> decoder;
  std::optional<Conv<T>> up;  // from the next coarser level; absent on the coarsest
  std::optional<Conv<T>> rgb;
};

template <typename T>
class Generator {
 public:
  explicit Generator(GeneratorConfig config, std::uint64_t seed = 1);

  MultiScaleOutput<T> forward(const Tensor<T>& target, const FaceEmbedding<T>& f_id,
                              ForwardTrace* trace = nullptr) const;

  void set_training(bool on) noexcept { training_ = on; }
  bool training() const noexcept { return training_; }

  const GeneratorConfig& config() const noexcept { return config_; }
  const HeaderParams<T>& header() const noexcept { return header_; }
  const std::vector<Level<T>>& levels() const noexcept { return levels_; }
  const Conv<T>& full_up() const noexcept { return full_up_; }
  const Conv<T>& full_rgb() const noexcept { return full_rgb_; }

  std::vector<NamedTensor<T>>& parameters() { return store_.parameters(); }
  const std::vector<NamedTensor<T>>& parameters() const { return store_.parameters(); }
  const std::vector<NamedTensor<T>>& buffers() const { return store_.buffers(); }
  std::vector<Tensor<T>> parameter_tensors() const;

  ParamCount param_count() const;

 private:
  GeneratorConfig config_;
  ParamStore<T> store_;
  HeaderParams<T> header_;
  std::vector<Level<T>> levels_;
  Conv<T> full_up_;
  Conv<T> full_rgb_;
  bool training_ = false;
};

// Builds the generator for config.variant (validates the config first).
template <typename T>
Generator<T> build_variant(const GeneratorConfig& config, std::uint64_t seed = 1);

template <typename T>
ParamCount param_count(const Generator<T>& model) {
  return model.param_count();
}

// Planned per-level layout (resolution, channels, block counts) for a config.
struct LevelPlan {
  std::int64_t resolution;
  std::int64_t channels;
  int identity_blocks;
  int attribute_blocks;
  int decoder_blocks;
};
std::vector<LevelPlan> plan_levels(const GeneratorConfig& config);

extern template class FaceEmbedding<float>;
extern template class FaceEmbedding<double>;
extern template class Generator<float>;
extern template class Generator<double>;

}  // namespace litefs
