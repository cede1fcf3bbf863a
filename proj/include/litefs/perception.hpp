#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "litefs/generator.hpp"
#include "litefs/layers.hpp"

namespace litefs {

enum class WeightSource { builtin_test, file };

struct FaceEmbedderSpec {
  std::int64_t input_size = 64;
  std::int64_t embedding_dim = 512;
  WeightSource source = WeightSource::builtin_test;
  std::filesystem::path weights_path;  // used when source == file
};

// Maps images to unit-norm identity embeddings. Implementations must be
// differentiable with respect to the input image.
template <typename T>
class FaceEmbedder {
 public:
  virtual ~FaceEmbedder() = default;
  virtual FaceEmbedding<T> embed(const Tensor<T>& images) const = 0;
  virtual std::int64_t dim() const = 0;
};

// Small 4-stage conv net: bilinear resize to the input size, four stride-2
// 3x3 convs (3->16->32->64->64) with leaky relu, a linear head, L2 normalize.
// Builtin weights are drawn from a fixed seed; its parameters are frozen.
template <typename T>
class ConvFaceEmbedder final : public FaceEmbedder<T> {
 public:
  static constexpr std::uint64_t builtin_seed = 0xFACE;

  explicit ConvFaceEmbedder(FaceEmbedderSpec spec = {});

  FaceEmbedding<T> embed(const Tensor<T>& images) const override;
  std::int64_t dim() const override { return spec_.embedding_dim; }
  const FaceEmbedderSpec& spec() const noexcept { return spec_; }
  const std::vector<NamedTensor<T>>& parameters() const { return store_.parameters(); }

 private:
  FaceEmbedderSpec spec_;
  ParamStore<T> store_;
  std::vector<Conv<T>> stages_;
  Linear<T> head_;
};

struct FeatureLayer {
  std::string name;
  std::int64_t channels = 0;
  std::int64_t stride = 1;  // feature extent = input extent / stride
};

struct FeatureExtractorSpec {
  std::vector<FeatureLayer> layers;
  WeightSource source = WeightSource::builtin_test;
  std::filesystem::path weights_path;
};

template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Tensor<T>> extract(const Tensor<T>& images) const = 0;
  virtual std::vector<FeatureLayer> layers() const = 0;
};

// F(x) = x, a single layer; reduces the attribute loss to an L1 pixel distance.
template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<Tensor<T>> extract(const Tensor<T>& images) const override { return {images}; }
  std::vector<FeatureLayer> layers() const override { return {{"pixels", 3, 1}}; }
};

// Three stride-2 3x3 conv stages (3->16->32->64) with leaky relu; every stage
// output is a declared feature layer.
template <typename T>
class ConvFeatureExtractor final : public FeatureExtractor<T> {
 public:
  static constexpr std::uint64_t builtin_seed = 0xF3A7;

  ConvFeatureExtractor();
  explicit ConvFeatureExtractor(const std::filesystem::path& weights);

  std::vector<Tensor<T>> extract(const Tensor<T>& images) const override;
  std::vector<FeatureLayer> layers() const override;
  const std::vector<NamedTensor<T>>& parameters() const { return store_.parameters(); }

 private:
  ParamStore<T> store_;
  std::vector<Conv<T>> stages_;
};

// Loads archive tensors into a perception net's parameters (LoadError names
// any missing or mis-shaped tensor).
template <typename T>
void load_perception_weights(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& params);

template <typename T>
std::unique_ptr<FaceEmbedder<T>> make_embedder(const FaceEmbedderSpec& spec);

extern template class ConvFaceEmbedder<float>;
extern template class ConvFaceEmbedder<double>;
extern template class ConvFeatureExtractor<float>;
extern template class ConvFeatureExtractor<double>;

}  // namespace litefs
