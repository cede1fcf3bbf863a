#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "litefs/cli.hpp"
#include "litefs/image_io.hpp"
#include "litefs/pipeline.hpp"
#include "litefs/synthetic.hpp"

using namespace litefs;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("litefs_cli_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli(args, out, err);
  return {code, out.str(), err.str()};
}

// A small model so the CLI paths run in well under a second.
std::filesystem::path tiny_config(const std::filesystem::path& dir) {
  const auto p = dir / "tiny.conf";
  std::ofstream(p) << "resolution = 32\nchannels = 8\nembedding_dim = 16\nembedder_input = 16\nd_channels = 4\n"
                      "batch_size = 2\n";
  return p;
}

}  // namespace

TEST_CASE("paramcount prints count and bytes") {
  const auto r = run({"paramcount", "--variant", "baseline"});
  CHECK(r.code == exit_ok);
  CHECK(r.out.find("params 2550985") != std::string::npos);
  CHECK(r.out.find("fp32_bytes 10203940") != std::string::npos);
}

TEST_CASE("usage errors exit with 1 and print usage") {
  auto r = run({"frobnicate"});
  CHECK(r.code == exit_usage);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == exit_usage);
  CHECK(run({"forge", "--out", "x.tsv"}).code == exit_usage);  // --corpus missing
  CHECK(run({"paramcount", "--variant", "giant"}).code == exit_usage);
  CHECK(run({"--help"}).code == exit_ok);

  const auto dir = temp_dir("badkey");
  std::ofstream(dir / "typo.conf") << "chanels = 32\n";
  r = run({"paramcount", "--config", (dir / "typo.conf").string()});
  CHECK(r.code == exit_usage);
  CHECK(r.err.find("chanels") != std::string::npos);
}

TEST_CASE("forge is deterministic across invocations") {
  const auto dir = temp_dir("forge");
  const auto corpus = write_synthetic_corpus(dir / "data", 2, 2, 16, 7);
  const auto a = dir / "a.tsv", b = dir / "b.tsv";
  CHECK(run({"forge", "--corpus", corpus.string(), "--out", a.string(), "--seed", "7"}).code == exit_ok);
  CHECK(run({"forge", "--corpus", corpus.string(), "--out", b.string(), "--seed", "7", "--image-dir",
             (dir / "a.tsv.images").string()})
            .code == exit_ok);
  CHECK(file_bytes(a) == file_bytes(b));
  CHECK(file_bytes(a).rfind("#fstriplets v1", 0) == 0);
}

TEST_CASE("swap with untrained weights runs, stays in range and is deterministic") {
  const auto dir = temp_dir("swap");
  const auto conf = tiny_config(dir);
  const auto corpus = write_synthetic_corpus(dir / "data", 2, 1, 48, 2);
  (void)corpus;
  const auto src = (dir / "data" / "id0_p0.ppm").string(), tgt = (dir / "data" / "id1_p0.ppm").string();
  const auto o1 = dir / "o1.ppm", o2 = dir / "o2.ppm";
  const auto r = run({"swap", "--config", conf.string(), "--source", src, "--target", tgt, "--out", o1.string(),
                      "--all-scales"});
  REQUIRE(r.code == exit_ok);
  CHECK(r.out.find("embedder calls 1") != std::string::npos);
  CHECK(run({"swap", "--config", conf.string(), "--source", src, "--target", tgt, "--out", o2.string()}).code ==
        exit_ok);
  CHECK(file_bytes(o1) == file_bytes(o2));
  CHECK(std::filesystem::exists(dir / "o1_q.ppm"));
  const auto img = read_ppm(o1);
  CHECK(img.dim(2) == 32);
  for (float v : img.values()) CHECK((v >= -1.0f && v <= 1.0f));

  std::filesystem::remove(dir / "data" / "id1_p0.lm");
  CHECK(run({"swap", "--config", conf.string(), "--source", src, "--target", tgt, "--out", o1.string()}).code ==
        exit_usage);

  std::ofstream(dir / "junk.fswt") << "not weights";
  CHECK(run({"swap", "--config", conf.string(), "--source", src, "--target", src, "--out", o1.string(), "--weights",
             (dir / "junk.fswt").string()})
            .code == exit_runtime);
}

TEST_CASE("bench times forward passes only") {
  GeneratorConfig g;
  g.resolution = 32;
  g.channels = 8;
  g.embedding_dim = 16;
  BenchOptions o;
  o.generator = g;
  o.embedder.input_size = 16;
  o.runs = 7;
  o.warmup = 2;
  const auto rep = bench(o);
  CHECK(rep.runs_ms.size() == 7);
  CHECK(rep.mean_ms == rep.recomputed_mean());
  CHECK(rep.embed_calls_timed == 0);
  CHECK(rep.param_count > 0);
  CHECK(rep.fp32_bytes == 4 * rep.param_count);

  const auto dir = temp_dir("bench");
  const auto conf = tiny_config(dir);
  const auto csv = dir / "bench.csv";
  const auto r = run({"bench", "--config", conf.string(), "--variant", "baseline", "--variant", "shallow", "--runs",
                      "3", "--warmup", "1", "--out", csv.string()});
  CHECK(r.code == exit_ok);
  CHECK(r.out.find("shallow") != std::string::npos);
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1 + 2 * (3 + 1));
}

TEST_CASE("align writes the aligned crop") {
  const auto dir = temp_dir("align");
  write_synthetic_corpus(dir, 1, 1, 40, 4);
  const auto out = dir / "aligned.ppm";
  CHECK(run({"align", "--image", (dir / "id0_p0.ppm").string(), "--size", "24", "--out", out.string()}).code ==
        exit_ok);
  CHECK(read_ppm(out).dim(3) == 24);
  CHECK(run({"align", "--image", (dir / "missing.ppm").string(), "--out", out.string()}).code == exit_usage);
}

TEST_CASE("aligned corpus loading and a short training run through the CLI") {
  const auto dir = temp_dir("train");
  const auto conf = tiny_config(dir);
  const auto corpus = write_synthetic_corpus(dir / "data", 2, 2, 40, 9);
  const auto data = load_aligned_corpus(corpus, 32);
  CHECK(data.images.size() == 4);
  CHECK(data.images[0].pixels.dim(2) == 32);
  const auto r = run({"train", "--config", conf.string(), "--corpus", corpus.string(), "--out", (dir / "run").string(),
                      "--steps", "2", "--align", "--seed", "3"});
  CHECK(r.code == exit_ok);
  CHECK(std::filesystem::exists(dir / "run" / "generator.fswt"));
  CHECK(std::filesystem::exists(dir / "run" / "losses.csv"));
}
