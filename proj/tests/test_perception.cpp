#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "litefs/perception.hpp"
#include "litefs/weights_io.hpp"

using namespace litefs;
using litefs::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("litefs_perception_" + name);
}

double row_norm(const Tensor<float>& rows, std::int64_t b) {
  double s = 0;
  for (std::int64_t i = 0; i < rows.dim(1); ++i) s += std::pow(rows.values()[b * rows.dim(1) + i], 2);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("builtin embedder emits unit-norm, deterministic embeddings") {
  ConvFaceEmbedder<float> a, b;
  auto img = random_tensor<float>(Shape{3, 3, 256, 256}, 1);
  auto ea = a.embed(img);
  auto eb = b.embed(img);
  CHECK(ea.batch() == 3);
  CHECK(ea.dim() == 512);
  for (std::int64_t r = 0; r < 3; ++r) CHECK(std::abs(row_norm(ea.rows(), r) - 1.0) < 1e-5);
  for (std::size_t i = 0; i < ea.rows().values().size(); ++i) CHECK(ea.rows().values()[i] == eb.rows().values()[i]);
  auto self = row_dot(ea.rows(), ea.rows());
  for (float c : self.values()) CHECK(c == doctest::Approx(1.0).epsilon(1e-5));
  for (const auto& p : a.parameters()) CHECK_FALSE(p.tensor.requires_grad());
}

TEST_CASE("embedder is Lipschitz in its input") {
  ConvFaceEmbedder<double> emb;
  auto img = random_tensor<double>(Shape{1, 3, 64, 64}, 2);
  auto pert = random_tensor<double>(Shape{1, 3, 64, 64}, 3);
  const double eps = 1e-3;
  double pnorm = 0;
  for (auto& v : pert.mutable_values()) {
    v *= eps;
    pnorm += v * v;
  }
  auto e0 = emb.embed(img);
  auto e1 = emb.embed(add(img, pert));
  double d = 0;
  for (std::size_t i = 0; i < e0.rows().values().size(); ++i) {
    d += std::pow(e0.rows().values()[i] - e1.rows().values()[i], 2);
  }
  CHECK(std::sqrt(d) / std::sqrt(pnorm) < 100.0);
}

TEST_CASE("feature extractors honor their declared layers") {
  ConvFeatureExtractor<float> conv;
  auto img = random_tensor<float>(Shape{1, 3, 256, 256}, 4);
  auto feats = conv.extract(img);
  const auto layers = conv.layers();
  REQUIRE(feats.size() == layers.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    CHECK(feats[i].shape() == Shape{1, layers[i].channels, 256 / layers[i].stride, 256 / layers[i].stride});
  }
  auto again = ConvFeatureExtractor<float>().extract(img);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t k = 0; k < feats[i].values().size(); ++k) CHECK(feats[i].values()[k] == again[i].values()[k]);
  }
  IdentityExtractor<float> lin;
  auto id = lin.extract(img);
  REQUIRE(id.size() == 1);
  CHECK(id[0].shares_storage(img));
}

TEST_CASE("perception weights round-trip through the archive") {
  ConvFaceEmbedder<float> builtin;
  auto path = temp_path("embed.fswt");
  save_weights(path, builtin.parameters());
  // perturbed copy, then reload
  auto spec = FaceEmbedderSpec{};
  spec.source = WeightSource::file;
  spec.weights_path = path;
  ConvFaceEmbedder<float> loaded(spec);
  for (std::size_t i = 0; i < builtin.parameters().size(); ++i) {
    const auto& a = builtin.parameters()[i].tensor.values();
    const auto& b = loaded.parameters()[i].tensor.values();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ConvFaceEmbedder<float>{spec}, LoadError);
}

TEST_CASE("corrupted or mismatched archives are rejected") {
  ConvFeatureExtractor<float> conv;
  auto path = temp_path("features.fswt");
  save_weights(path, conv.parameters());
  CHECK_NOTHROW(ConvFeatureExtractor<float>{path});

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(ConvFeatureExtractor<float>{path}, LoadError);

  auto params = conv.parameters();
  params[2].tensor = Tensor<float>(Shape{32, 16, 1, 1}, 0.0f);
  save_weights(path, params);
  try {
    ConvFeatureExtractor<float> bad(path);
    FAIL("expected a load error");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("features.c1.weight") != std::string::npos);
  }
  std::filesystem::remove(path);
}
