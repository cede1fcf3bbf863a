#include "litefs/perception.hpp"

#include "litefs/weights_io.hpp"

namespace litefs {

namespace {

template <typename T>
void freeze(const std::vector<NamedTensor<T>>& params) {
  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    t.set_requires_grad(false);
  }
}

}  // namespace

template <typename T>
void load_perception_weights(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& params) {
  load_weights_into(path, params, true);
}

template <typename T>
ConvFaceEmbedder<T>::ConvFaceEmbedder(FaceEmbedderSpec spec) : spec_(std::move(spec)), store_(builtin_seed) {
  if (spec_.input_size < 16 || spec_.input_size % 16 != 0) {
    throw ConfigError("embedder input size must be a positive multiple of 16");
  }
  if (spec_.embedding_dim < 1) throw ConfigError("embedding dim must be positive");
  const std::int64_t widths[] = {3, 16, 32, 64, 64};
  for (int i = 0; i < 4; ++i) {
    stages_.push_back(store_.conv("embed.c" + std::to_string(i), widths[i], widths[i + 1], 3, 2, 1));
  }
  const std::int64_t side = spec_.input_size / 16;
  const std::int64_t flat = 64 * side * side;
  head_ = store_.linear("embed.fc", flat, spec_.embedding_dim, 1.0 / std::sqrt(static_cast<double>(flat)), 0.0);
  if (spec_.source == WeightSource::file) load_perception_weights<T>(spec_.weights_path, store_.parameters());
  freeze(store_.parameters());
}

template <typename T>
FaceEmbedding<T> ConvFaceEmbedder<T>::embed(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw DimensionError("embedder expects [B,3,H,W], got " + shape_string(images.shape()));
  }
  Tensor<T> x = resize_bilinear(images, spec_.input_size, spec_.input_size);
  for (const auto& s : stages_) x = leaky_relu(s(x), 0.2);
  x = x.view(Shape{x.dim(0), x.numel() / x.dim(0)});
  return FaceEmbedding<T>::normalized(head_(x));
}

template <typename T>
ConvFeatureExtractor<T>::ConvFeatureExtractor() : store_(builtin_seed) {
  const std::int64_t widths[] = {3, 16, 32, 64};
  for (int i = 0; i < 3; ++i) {
    stages_.push_back(store_.conv("features.c" + std::to_string(i), widths[i], widths[i + 1], 3, 2, 1));
  }
  freeze(store_.parameters());
}

template <typename T>
ConvFeatureExtractor<T>::ConvFeatureExtractor(const std::filesystem::path& weights) : ConvFeatureExtractor() {
  load_perception_weights<T>(weights, store_.parameters());
}

template <typename T>
std::vector<Tensor<T>> ConvFeatureExtractor<T>::extract(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw DimensionError("feature extractor expects [B,3,H,W], got " + shape_string(images.shape()));
  }
  std::vector<Tensor<T>> out;
  Tensor<T> x = images;
  for (const auto& s : stages_) {
    x = leaky_relu(s(x), 0.2);
    out.push_back(x);
  }
  return out;
}

template <typename T>
std::vector<FeatureLayer> ConvFeatureExtractor<T>::layers() const {
  return {{"features.c0", 16, 2}, {"features.c1", 32, 4}, {"features.c2", 64, 8}};
}

template <typename T>
std::unique_ptr<FaceEmbedder<T>> make_embedder(const FaceEmbedderSpec& spec) {
  return std::make_unique<ConvFaceEmbedder<T>>(spec);
}

template class ConvFaceEmbedder<float>;
template class ConvFaceEmbedder<double>;
template class ConvFeatureExtractor<float>;
template class ConvFeatureExtractor<double>;
template void load_perception_weights<float>(const std::filesystem::path&, const std::vector<NamedTensor<float>>&);
template void load_perception_weights<double>(const std::filesystem::path&, const std::vector<NamedTensor<double>>&);
template std::unique_ptr<FaceEmbedder<float>> make_embedder<float>(const FaceEmbedderSpec&);
template std::unique_ptr<FaceEmbedder<double>> make_embedder<double>(const FaceEmbedderSpec&);

}  // namespace litefs
