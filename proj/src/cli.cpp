#include "litefs/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "litefs/alignment.hpp"
#include "litefs/config.hpp"
#include "litefs/errors.hpp"
#include "litefs/image_io.hpp"
#include "litefs/pipeline.hpp"
#include "litefs/synthetic.hpp"
#include "litefs/trainer.hpp"
#include "litefs/triplet_forge.hpp"

namespace litefs {

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "random seed");
  auto* o = sub->add_option("--out", c.out, "output path");
  if (out_required) o->required();
}

KeyValueConfig load_config(const Common& c) {
  return c.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config);
}

// Training/model settings from the config, with --seed applied on top.
TrainConfig settings(const KeyValueConfig& kv, const Common& c) {
  TrainConfig t = train_config_from(kv);
  if (c.seed) t.seed = *c.seed;
  return t;
}

std::string describe_count(const std::string& variant, const ParamCount& pc) {
  std::ostringstream os;
  os << variant << " params " << pc.count << " fp32_bytes " << pc.fp32_bytes << " (" << std::fixed
     << std::setprecision(2) << pc.megabytes() << " MB)";
  return os.str();
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightweight face swapping: training, inference, benchmarking and data tools", "litefs"};
  app.require_subcommand(1, 1);

  // train
  Common train_c;
  std::string train_corpus, train_resume;
  std::optional<std::int64_t> train_steps;
  bool train_align = false;
  auto* train = app.add_subcommand("train", "train generator and critics on an image corpus");
  add_common(train, train_c, true);
  train->add_option("--corpus", train_corpus, "corpus TSV (path, identity, resolution)")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option("--steps", train_steps, "override total_steps");
  train->add_flag("--align", train_align, "align every image with its .lm landmarks first");

  // swap
  Common swap_c;
  std::string swap_weights, swap_source, swap_target, swap_source_lm, swap_target_lm;
  bool swap_all = false;
  auto* swap = app.add_subcommand("swap", "put the source identity onto the target face");
  add_common(swap, swap_c, true);
  swap->add_option("--weights", swap_weights, "generator weights (default: fresh initialization)");
  swap->add_option("--source", swap_source, "source image (PPM)")->required();
  swap->add_option("--target", swap_target, "target image (PPM)")->required();
  swap->add_option("--source-lm", swap_source_lm, "source landmarks (default: <source>.lm)");
  swap->add_option("--target-lm", swap_target_lm, "target landmarks (default: <target>.lm)");
  swap->add_flag("--all-scales", swap_all, "also write the two lower-resolution outputs");

  // bench
  Common bench_c;
  std::vector<std::string> bench_variants;
  int bench_runs = 100, bench_warmup = 10;
  std::optional<std::int64_t> bench_resolution;
  auto* bench_cmd = app.add_subcommand("bench", "time generator forward passes");
  add_common(bench_cmd, bench_c, false);
  bench_cmd->add_option("--variant", bench_variants, "variant(s) to time (default: config variant)");
  bench_cmd->add_option("--runs", bench_runs, "timed runs")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup runs")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--resolution", bench_resolution, "override input resolution");

  // forge
  Common forge_c;
  std::string forge_corpus, forge_image_dir;
  std::int64_t forge_resolution = 0;
  bool forge_no_plain = false;
  auto* forge = app.add_subcommand("forge", "build a triplet manifest from a corpus");
  add_common(forge, forge_c, true);
  forge->add_option("--corpus", forge_corpus, "corpus TSV")->required();
  forge->add_option("--image-dir", forge_image_dir, "where edited images go (default: <out>.images)");
  forge->add_option("--resolution", forge_resolution, "resize images first (0 keeps them)");
  forge->add_flag("--no-plain", forge_no_plain, "skip plain cross-identity pairs");

  // paramcount
  Common count_c;
  std::string count_variant;
  auto* paramcount = app.add_subcommand("paramcount", "print generator parameter count and fp32 size");
  add_common(paramcount, count_c, false);
  paramcount->add_option("--variant", count_variant, "baseline, wide, shallow, nofuse or hourglass");

  // align
  Common align_c;
  std::string align_image, align_lm;
  std::optional<std::int64_t> align_size;
  auto* align = app.add_subcommand("align", "align and crop a face with five landmarks");
  add_common(align, align_c, true);
  align->add_option("--image", align_image, "input image (PPM)")->required();
  align->add_option("--landmarks", align_lm, "landmarks file (default: <image>.lm)");
  align->add_option("--size", align_size, "output size (default: config resolution)");

  // synth
  Common synth_c;
  int synth_ids = 4, synth_photos = 2;
  std::int64_t synth_size = 64;
  auto* synth = app.add_subcommand("synth", "write a synthetic face corpus for demos and tests");
  add_common(synth, synth_c, true);
  synth->add_option("--identities", synth_ids, "number of identities")->check(CLI::PositiveNumber);
  synth->add_option("--photos", synth_photos, "photos per identity")->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size, "image size")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return exit_usage;
  }

  try {
    if (train->parsed()) {
      auto kv = load_config(train_c);
      TrainConfig cfg = settings(kv, train_c);
      kv.require_all_used();
      if (train_steps) cfg.total_steps = *train_steps;
      cfg.validate();
      const auto data = train_align ? load_aligned_corpus(train_corpus, cfg.generator.resolution)
                                    : load_corpus(train_corpus, cfg.generator.resolution);
      std::optional<std::filesystem::path> resume;
      if (!train_resume.empty()) resume = train_resume;
      const auto r = train_loop(cfg, data, train_c.out, resume);
      out << "trained " << r.steps << " steps; rec@10 " << r.rec_at_step10 << " final rec " << r.final_rec << '\n'
          << "checkpoint " << r.checkpoint.string() << "\ngenerator " << r.generator_weights.string() << '\n';
    } else if (swap->parsed()) {
      auto kv = load_config(swap_c);
      const TrainConfig cfg = settings(kv, swap_c);
      kv.require_all_used();
      SwapOptions o;
      o.source = swap_source;
      o.target = swap_target;
      if (!swap_source_lm.empty()) o.source_landmarks = swap_source_lm;
      if (!swap_target_lm.empty()) o.target_landmarks = swap_target_lm;
      if (!swap_weights.empty()) o.weights = swap_weights;
      o.generator = cfg.generator;
      o.embedder = cfg.embedder;
      o.seed = cfg.seed;
      o.output = swap_c.out;
      o.all_scales = swap_all;
      const auto r = swap_faces(o);
      for (const auto& p : r.written) out << "wrote " << p.string() << '\n';
      out << "embedder calls " << r.embed_calls << '\n'
          << "psnr vs aligned target " << std::fixed << std::setprecision(2) << r.psnr_vs_target << " dB\n";
    } else if (bench_cmd->parsed()) {
      auto kv = load_config(bench_c);
      const TrainConfig cfg = settings(kv, bench_c);
      kv.require_all_used();
      if (bench_variants.empty()) bench_variants.push_back(to_string(cfg.generator.variant));
      std::vector<BenchReport> reports;
      for (const auto& v : bench_variants) {
        BenchOptions o;
        o.generator = cfg.generator;
        o.generator.variant = parse_variant(v);
        if (bench_resolution) o.generator.resolution = *bench_resolution;
        o.embedder = cfg.embedder;
        o.runs = bench_runs;
        o.warmup = bench_warmup;
        o.seed = cfg.seed;
        reports.push_back(bench(o));
      }
      write_bench_table(out, reports);
      if (!bench_c.out.empty()) {
        write_bench_csv(bench_c.out, reports);
        out << "wrote " << bench_c.out << '\n';
      }
    } else if (forge->parsed()) {
      auto kv = load_config(forge_c);
      const TrainConfig cfg = settings(kv, forge_c);
      kv.require_all_used();
      ForgeOptions o;
      o.seed = forge_c.seed.value_or(cfg.seed);
      o.edit_magnitude = cfg.sampling.edit_magnitude;
      o.include_plain = !forge_no_plain;
      o.image_dir = forge_image_dir.empty() ? std::filesystem::path(forge_c.out + ".images") : std::filesystem::path(forge_image_dir);
      const auto data = load_corpus(forge_corpus, forge_resolution);
      const auto records = forge_dataset(data, o);
      write_manifest(forge_c.out, records);
      out << "wrote " << records.size() << " triplets to " << forge_c.out << '\n';
    } else if (paramcount->parsed()) {
      auto kv = load_config(count_c);
      TrainConfig cfg = settings(kv, count_c);
      kv.require_all_used();
      if (!count_variant.empty()) cfg.generator.variant = parse_variant(count_variant);
      const auto gen = build_variant<float>(cfg.generator, cfg.seed);
      const auto line = describe_count(to_string(cfg.generator.variant), gen.param_count());
      out << line << '\n';
      if (!count_c.out.empty()) {
        std::ofstream f(count_c.out, std::ios::trunc);
        f << line << '\n';
        if (!f) throw IoError("cannot write " + count_c.out);
      }
    } else if (align->parsed()) {
      auto kv = load_config(align_c);
      const TrainConfig cfg = settings(kv, align_c);
      kv.require_all_used();
      std::optional<std::filesystem::path> lm_path;
      if (!align_lm.empty()) lm_path = align_lm;
      const auto lm = read_landmarks(landmarks_for(align_image, lm_path));
      const auto aligned = align_face(read_ppm(align_image), lm, align_size.value_or(cfg.generator.resolution));
      write_ppm(align_c.out, aligned);
      out << "wrote " << align_c.out << '\n';
    } else if (synth->parsed()) {
      auto kv = load_config(synth_c);
      const TrainConfig cfg = settings(kv, synth_c);
      kv.require_all_used();
      const auto corpus = write_synthetic_corpus(synth_c.out, synth_ids, synth_photos, synth_size, cfg.seed);
      out << "wrote " << corpus.string() << '\n';
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_ok;
}

}  // namespace litefs
