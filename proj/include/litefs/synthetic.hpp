#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "litefs/alignment.hpp"
#include "litefs/tensor.hpp"

namespace litefs {

// A smooth face-like test image: a tinted oval with eye, nose and mouth blobs
// at `landmarks` over a soft background gradient. Identity fixes the palette,
// the photo seed fixes the background and lighting.
struct SyntheticFace {
  Tensor<float> image;  // [1,3,size,size] in [-1,1]
  Landmarks5 landmarks;
};

SyntheticFace synthetic_face(std::int64_t size, std::uint64_t identity, std::uint64_t photo);

// Writes identities x photos_per_identity faces as PPM files with ".lm"
// landmark files next to them, plus a corpus TSV; returns the corpus path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, int identities,
                                             int photos_per_identity, std::int64_t size, std::uint64_t seed);

}  // namespace litefs
