#include "litefs/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "litefs/alignment.hpp"
#include "litefs/image_io.hpp"
#include "litefs/tape.hpp"
#include "litefs/trainer.hpp"
#include "litefs/weights_io.hpp"

namespace litefs {

std::filesystem::path landmarks_for(const std::filesystem::path& image,
                                    const std::optional<std::filesystem::path>& explicit_path) {
  auto p = explicit_path ? *explicit_path : std::filesystem::path(image).replace_extension(".lm");
  if (!std::filesystem::exists(p)) {
    throw UsageError("landmarks file " + p.string() + " for " + image.string() + " does not exist");
  }
  return p;
}

Dataset load_aligned_corpus(const std::filesystem::path& corpus, std::int64_t resolution) {
  const auto base = corpus.parent_path();
  Dataset d;
  for (auto rec : read_corpus(corpus)) {
    const auto path = base / rec.path;
    const auto lm = read_landmarks(landmarks_for(path, std::nullopt));
    rec.resolution = resolution;
    d.images.push_back({rec, align_face(read_ppm(path), lm, resolution)});
  }
  if (d.images.empty()) throw UsageError("corpus " + corpus.string() + " lists no images");
  return d;
}

SwapResult swap_faces(const SwapOptions& opts) {
  opts.generator.validate();
  const auto src_lm = landmarks_for(opts.source, opts.source_landmarks);
  const auto tgt_lm = landmarks_for(opts.target, opts.target_landmarks);
  if (opts.output.empty()) throw UsageError("swap needs an output path");

  Generator<float> gen(opts.generator, opts.seed);
  if (opts.weights) {
    auto targets = generator_state(gen);
    load_weights_into(*opts.weights, targets);
  }
  gen.set_training(false);
  FaceEmbedderSpec spec = opts.embedder;
  spec.embedding_dim = opts.generator.embedding_dim;
  CountingEmbedder embedder(make_embedder<float>(spec));

  NoTapeScope off;
  SwapResult r;
  const auto size = opts.generator.resolution;
  r.aligned_source = align_face(read_ppm(opts.source), read_landmarks(src_lm), size);
  r.aligned_target = align_face(read_ppm(opts.target), read_landmarks(tgt_lm), size);
  const auto f_src = embedder.embed(r.aligned_source);
  r.output = gen.forward(r.aligned_target, f_src);
  r.embed_calls = embedder.calls();
  r.psnr_vs_target = psnr(r.output[full], r.aligned_target);

  write_ppm(opts.output, r.output[full]);
  r.written.push_back(opts.output);
  if (opts.all_scales) {
    const auto stem = opts.output.parent_path() / opts.output.stem();
    const std::filesystem::path q = stem.string() + "_q.ppm", h = stem.string() + "_h.ppm";
    write_ppm(q, r.output[quarter]);
    write_ppm(h, r.output[half]);
    r.written.push_back(q);
    r.written.push_back(h);
  }
  return r;
}

double BenchReport::recomputed_mean() const {
  if (runs_ms.empty()) return 0.0;
  return std::accumulate(runs_ms.begin(), runs_ms.end(), 0.0) / static_cast<double>(runs_ms.size());
}

BenchReport bench(const BenchOptions& opts) {
  if (opts.runs < 1 || opts.warmup < 0) throw UsageError("bench needs runs >= 1 and warmup >= 0");
  const Generator<float> gen = build_variant<float>(opts.generator, opts.seed);
  FaceEmbedderSpec spec = opts.embedder;
  spec.embedding_dim = opts.generator.embedding_dim;
  CountingEmbedder embedder(make_embedder<float>(spec));

  NoTapeScope off;
  const auto r = opts.generator.resolution;
  Tensor<float> source(Shape{1, 3, r, r}), target(Shape{1, 3, r, r});
  {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& v : source.mutable_values()) v = u(rng);
    for (auto& v : target.mutable_values()) v = u(rng);
  }
  const auto f_src = embedder.embed(source);

  BenchReport report;
  report.variant = to_string(opts.generator.variant);
  report.resolution = r;
  const auto count = gen.param_count();
  report.param_count = count.count;
  report.fp32_bytes = count.fp32_bytes;

  for (int i = 0; i < opts.warmup; ++i) (void)gen.forward(target, f_src);
  const auto calls_before = embedder.calls();
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < opts.runs; ++i) {
    const auto t0 = clock::now();
    const auto out = gen.forward(target, f_src);
    const auto t1 = clock::now();
    report.runs_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  report.embed_calls_timed = embedder.calls() - calls_before;
  report.mean_ms = report.recomputed_mean();
  return report;
}

void write_bench_table(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << std::left << std::setw(10) << "variant" << std::right << std::setw(6) << "res" << std::setw(12) << "params"
      << std::setw(11) << "fp32 MB" << std::setw(7) << "runs" << std::setw(12) << "mean ms" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << r.variant << std::right << std::setw(6) << r.resolution << std::setw(12)
        << r.param_count << std::setw(11) << std::fixed << std::setprecision(2)
        << static_cast<double>(r.fp32_bytes) / 1e6 << std::setw(7) << r.runs_ms.size() << std::setw(12)
        << std::setprecision(3) << r.mean_ms << '\n';
    out.unsetf(std::ios::fixed);
  }
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchReport>& reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "variant,resolution,params,fp32_bytes,run,ms\n";
  out << std::setprecision(9);
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.runs_ms.size(); ++i) {
      out << r.variant << ',' << r.resolution << ',' << r.param_count << ',' << r.fp32_bytes << ',' << i << ','
          << r.runs_ms[i] << '\n';
    }
    out << r.variant << ',' << r.resolution << ',' << r.param_count << ',' << r.fp32_bytes << ",mean," << r.mean_ms
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace litefs
