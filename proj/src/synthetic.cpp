#include "litefs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "litefs/errors.hpp"
#include "litefs/image_io.hpp"
#include "litefs/triplet_forge.hpp"

namespace litefs {

SyntheticFace synthetic_face(std::int64_t size, std::uint64_t identity, std::uint64_t photo) {
  if (size < 8) throw UsageError("synthetic faces need size >= 8");
  std::mt19937_64 id_rng(identity * 0x9E3779B97F4A7C15ull + 11);
  std::mt19937_64 photo_rng(photo * 0xD1B54A32D192ED03ull + identity);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double skin[3], feature[3];
  for (int c = 0; c < 3; ++c) {
    skin[c] = 0.15 + 0.35 * u(id_rng);
    feature[c] = -0.6 + 0.25 * u(id_rng);
  }
  const double face_w = 0.30 + 0.05 * u(id_rng), face_h = 0.38 + 0.05 * u(id_rng);

  SyntheticFace out{Tensor<float>(Shape{1, 3, size, size}), canonical_template(size)};
  const double jitter = 0.015 * static_cast<double>(size);
  for (auto& p : out.landmarks) {
    p.x += jitter * u(photo_rng);
    p.y += jitter * u(photo_rng);
  }
  double bg[3], phase[3];
  for (int c = 0; c < 3; ++c) {
    bg[c] = 0.3 * u(photo_rng);
    phase[c] = 3.0 * u(photo_rng);
  }
  const double light = 0.15 * u(photo_rng);

  const double s = static_cast<double>(size);
  const double cx = (out.landmarks[0].x + out.landmarks[1].x) / 2.0;
  const double cy = out.landmarks[2].y;
  const double blob_r2 = std::pow(0.035 * s, 2);
  auto v = out.image.mutable_values();
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double nx = x / s, ny = y / s;
      const double ex = (x - cx) / (face_w * s), ey = (y - cy) / (face_h * s);
      const double face = 1.0 / (1.0 + std::exp(12.0 * (ex * ex + ey * ey - 1.0)));
      double val[3];
      for (int c = 0; c < 3; ++c) {
        const double back = bg[c] + 0.2 * std::sin(2.5 * nx + phase[c]) * std::cos(2.0 * ny - phase[c]);
        val[c] = (1.0 - face) * back + face * (skin[c] + light * (nx - 0.5));
      }
      for (std::size_t k = 0; k < 5; ++k) {
        const double dx = x - out.landmarks[k].x, dy = y - out.landmarks[k].y;
        const double r2 = k >= 3 ? blob_r2 * 1.5 : blob_r2;  // mouth corners a bit wider
        const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * r2));
        for (int c = 0; c < 3; ++c) val[c] = (1.0 - w) * val[c] + w * feature[c];
      }
      for (int c = 0; c < 3; ++c) {
        v[(c * size + y) * size + x] = static_cast<float>(std::clamp(val[c], -1.0, 1.0));
      }
    }
  }
  return out;
}

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, int identities,
                                             int photos_per_identity, std::int64_t size, std::uint64_t seed) {
  if (identities < 1 || photos_per_identity < 1) throw UsageError("synthetic corpus needs at least one image");
  std::filesystem::create_directories(dir);
  std::vector<ImageRecord> records;
  for (int i = 0; i < identities; ++i) {
    for (int p = 0; p < photos_per_identity; ++p) {
      const auto face = synthetic_face(size, seed * 1000 + static_cast<std::uint64_t>(i),
                                       seed * 1000000 + static_cast<std::uint64_t>(i * photos_per_identity + p));
      const std::string stem = "id" + std::to_string(i) + "_p" + std::to_string(p);
      write_ppm(dir / (stem + ".ppm"), face.image);
      write_landmarks(dir / (stem + ".lm"), face.landmarks);
      records.push_back({stem + ".ppm", "id" + std::to_string(i), size});
    }
  }
  const auto corpus = dir / "corpus.tsv";
  write_corpus(corpus, records);
  return corpus;
}

}  // namespace litefs
