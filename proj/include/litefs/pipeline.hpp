#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "litefs/generator.hpp"
#include "litefs/perception.hpp"
#include "litefs/triplet_forge.hpp"

namespace litefs {

// Forwards to another embedder and counts embed() calls.
class CountingEmbedder final : public FaceEmbedder<float> {
 public:
  explicit CountingEmbedder(std::unique_ptr<FaceEmbedder<float>> inner) : inner_(std::move(inner)) {}
  FaceEmbedding<float> embed(const Tensor<float>& images) const override {
    ++calls_;
    return inner_->embed(images);
  }
  std::int64_t dim() const override { return inner_->dim(); }
  std::int64_t calls() const noexcept { return calls_; }

 private:
  std::unique_ptr<FaceEmbedder<float>> inner_;
  mutable std::atomic<std::int64_t> calls_{0};
};

// The landmark file for an image: `explicit_path` if given, otherwise the
// image path with a ".lm" extension. UsageError when the file does not exist.
std::filesystem::path landmarks_for(const std::filesystem::path& image,
                                    const std::optional<std::filesystem::path>& explicit_path);

// Loads a corpus and aligns every image with its ".lm" landmark file to
// resolution x resolution (the preprocessing swap applies to its inputs).
Dataset load_aligned_corpus(const std::filesystem::path& corpus, std::int64_t resolution);

struct SwapOptions {
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> source_landmarks;
  std::optional<std::filesystem::path> target_landmarks;
  std::optional<std::filesystem::path> weights;  // absent: freshly initialized generator
  GeneratorConfig generator;
  FaceEmbedderSpec embedder;
  std::uint64_t seed = 1;
  std::filesystem::path output;  // full-resolution result
  bool all_scales = false;       // also write <stem>_q.ppm and <stem>_h.ppm
};

struct SwapResult {
  Tensor<float> aligned_source;
  Tensor<float> aligned_target;
  MultiScaleOutput<float> output;
  std::vector<std::filesystem::path> written;
  std::int64_t embed_calls = 0;
  double psnr_vs_target = 0;  // full-resolution output against the aligned target (8-bit scale)
};

// Aligns both faces, embeds the source once, runs the generator on the target
// in inference mode and writes the result(s).
SwapResult swap_faces(const SwapOptions& opts);

struct BenchOptions {
  GeneratorConfig generator;
  FaceEmbedderSpec embedder;
  int runs = 100;
  int warmup = 10;
  std::uint64_t seed = 1;
};

struct BenchReport {
  std::string variant;
  std::int64_t resolution = 0;
  std::int64_t param_count = 0;
  std::int64_t fp32_bytes = 0;
  std::vector<double> runs_ms;
  double mean_ms = 0;
  std::int64_t embed_calls_timed = 0;  // embedder invocations inside the timed loop

  double recomputed_mean() const;
};

// Times generator forward passes only; the identity embedding is computed once
// before the timed region.
BenchReport bench(const BenchOptions& opts);

void write_bench_table(std::ostream& out, const std::vector<BenchReport>& reports);
// One row per timed run: variant,resolution,params,fp32_bytes,run,ms (plus a mean row per variant).
void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchReport>& reports);

}  // namespace litefs
