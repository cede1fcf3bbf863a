#include "litefs/triplet_forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "litefs/alignment.hpp"
#include "litefs/errors.hpp"
#include "litefs/image_io.hpp"
#include "litefs/ops.hpp"

namespace litefs {

namespace {

struct Plane {
  std::int64_t h, w;
  std::size_t index(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return static_cast<std::size_t>((c * h + y) * w + x);
  }
};

Plane plane_of(const Tensor<float>& img) {
  if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 3) {
    throw DimensionError("edit expects a [1,3,H,W] image, got " + shape_string(img.shape()));
  }
  return {img.dim(2), img.dim(3)};
}

float clamp1(double v) { return static_cast<float>(std::clamp(v, -1.0, 1.0)); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bilinear read with edge clamping.
double sample(const Tensor<float>& img, const Plane& p, std::int64_t c, double y, double x) {
  x = std::clamp(x, 0.0, static_cast<double>(p.w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(p.h - 1));
  const auto x0 = static_cast<std::int64_t>(std::floor(x)), y0 = static_cast<std::int64_t>(std::floor(y));
  const auto x1 = std::min(x0 + 1, p.w - 1), y1 = std::min(y0 + 1, p.h - 1);
  const double wx = x - x0, wy = y - y0;
  const auto v = img.values();
  const double top = v[p.index(c, y0, x0)] * (1 - wx) + v[p.index(c, y0, x1)] * wx;
  const double bot = v[p.index(c, y1, x0)] * (1 - wx) + v[p.index(c, y1, x1)] * wx;
  return top * (1 - wy) + bot * wy;
}

Tensor<float> bulge(const Tensor<float>& img, double m, std::mt19937_64& rng) {
  const Plane p = plane_of(img);
  const double cx = 0.5 * (p.w - 1) * (1 + uniform(rng, -0.03, 0.03));
  const double cy = 0.55 * (p.h - 1) * (1 + uniform(rng, -0.03, 0.03));
  const double radius = 0.38 * p.w * uniform(rng, 0.9, 1.1);
  const double k = 0.35 * m * uniform(rng, 0.8, 1.2);
  Tensor<float> out(img.shape());
  auto o = out.mutable_values();
  for (std::int64_t y = 0; y < p.h; ++y) {
    for (std::int64_t x = 0; x < p.w; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double r = std::hypot(dx, dy);
      double f = 1.0;
      if (r < radius) f = 1.0 - k * (1.0 - r / radius) * (1.0 - r / radius);
      for (std::int64_t c = 0; c < 3; ++c) o[p.index(c, y, x)] = clamp1(sample(img, p, c, cy + dy * f, cx + dx * f));
    }
  }
  return out;
}

Tensor<float> aging(const Tensor<float>& img, double m, std::mt19937_64& rng) {
  const Plane p = plane_of(img);
  const double desat = 0.6 * std::min(m, 1.0);
  const double contrast = 1.0 + 0.25 * m;
  const double amp = 0.06 * m;
  struct Wave {
    double fx, fy, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) {
    waves.push_back({uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6), uniform(rng, 0, 2 * std::numbers::pi)});
  }
  const auto v = img.values();
  Tensor<float> out(img.shape());
  auto o = out.mutable_values();
  for (std::int64_t y = 0; y < p.h; ++y) {
    for (std::int64_t x = 0; x < p.w; ++x) {
      double texture = 0;
      for (const auto& w : waves) texture += std::sin(w.fx * x + w.fy * y + w.phase);
      texture *= amp / waves.size();
      double gray = 0;
      for (std::int64_t c = 0; c < 3; ++c) gray += v[p.index(c, y, x)] / 3.0;
      for (std::int64_t c = 0; c < 3; ++c) {
        const double mixed = v[p.index(c, y, x)] * (1 - desat) + gray * desat;
        o[p.index(c, y, x)] = clamp1(mixed * contrast - 0.05 * m + texture);
      }
    }
  }
  return out;
}

Tensor<float> glasses(const Tensor<float>& img, double m, std::mt19937_64& rng) {
  const Plane p = plane_of(img);
  const auto eyes = canonical_template(p.w);
  const double sy = static_cast<double>(p.h) / p.w;
  const double radius = 0.09 * p.w * uniform(rng, 0.9, 1.1);
  const double thick = std::max(1.0, 0.02 * p.w * uniform(rng, 0.8, 1.3));
  const double shade = uniform(rng, -0.95, -0.6);
  const double alpha = std::clamp(m, 0.0, 1.0);
  const Point l{eyes[0].x, eyes[0].y * sy}, r{eyes[1].x, eyes[1].y * sy};
  Tensor<float> out = img.detach();
  auto o = out.mutable_values();
  for (std::int64_t y = 0; y < p.h; ++y) {
    for (std::int64_t x = 0; x < p.w; ++x) {
      const double dl = std::abs(std::hypot(x - l.x, y - l.y) - radius);
      const double dr = std::abs(std::hypot(x - r.x, y - r.y) - radius);
      const bool bridge = x > l.x + radius && x < r.x - radius && std::abs(y - 0.5 * (l.y + r.y)) < 0.5 * thick;
      if (std::min(dl, dr) < 0.5 * thick || bridge) {
        for (std::int64_t c = 0; c < 3; ++c) {
          const auto i = p.index(c, y, x);
          o[i] = clamp1(o[i] * (1 - alpha) + shade * alpha);
        }
      }
    }
  }
  return out;
}

Tensor<float> tint(const Tensor<float>& img, double m, std::mt19937_64& rng) {
  const Plane p = plane_of(img);
  const double color[3] = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
  const double cx = 0.5 * (p.w - 1), cy = 0.52 * (p.h - 1);
  const double rx = 0.36 * p.w, ry = 0.48 * p.h;
  const double strength = 0.5 * std::min(m, 2.0);
  Tensor<float> out = img.detach();
  auto o = out.mutable_values();
  for (std::int64_t y = 0; y < p.h; ++y) {
    for (std::int64_t x = 0; x < p.w; ++x) {
      const double d = std::hypot((x - cx) / rx, (y - cy) / ry);
      const double mask = std::clamp((d - 0.9) / 0.2, 0.0, 1.0);  // 0 on the face, 1 in the background
      if (mask == 0.0) continue;
      for (std::int64_t c = 0; c < 3; ++c) {
        const auto i = p.index(c, y, x);
        o[i] = clamp1(o[i] + mask * strength * (color[c] - o[i]));
      }
    }
  }
  return out;
}

Tensor<float> flip(const Tensor<float>& img) {
  const Plane p = plane_of(img);
  Tensor<float> out(img.shape());
  auto o = out.mutable_values();
  const auto v = img.values();
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t y = 0; y < p.h; ++y) {
      for (std::int64_t x = 0; x < p.w; ++x) o[p.index(c, y, x)] = v[p.index(c, y, p.w - 1 - x)];
    }
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void require_kind(const EditOp& op, EditKind kind, const char* slot) {
  if (op.kind != kind) {
    throw SchemaError(std::string("edit '") + op.name + "' cannot fill the " + slot + " slot");
  }
}

}  // namespace

const std::vector<std::string>& identity_edit_names() {
  static const std::vector<std::string> names{"bulge", "aging"};
  return names;
}

const std::vector<std::string>& attribute_edit_names() {
  static const std::vector<std::string> names{"glasses", "tint", "flip"};
  return names;
}

EditOp make_edit(const std::string& name, double magnitude) {
  if (!(magnitude >= 0.0)) throw ConfigError("edit magnitude must be nonnegative");
  const auto& id = identity_edit_names();
  const auto& at = attribute_edit_names();
  if (std::find(id.begin(), id.end(), name) != id.end()) return {name, EditKind::identity_edit, magnitude};
  if (std::find(at.begin(), at.end(), name) != at.end()) return {name, EditKind::attribute_edit, magnitude};
  throw ConfigError("unknown edit operator '" + name + "'");
}

Tensor<float> apply_edit(const Tensor<float>& image, const EditOp& op, std::uint64_t seed) {
  plane_of(image);
  const EditOp checked = make_edit(op.name, op.magnitude);
  if (checked.kind != op.kind) throw SchemaError("edit '" + op.name + "' has the wrong kind");
  if (op.magnitude == 0.0) return image.detach();
  std::mt19937_64 rng(seed);
  if (op.name == "bulge") return bulge(image, op.magnitude, rng);
  if (op.name == "aging") return aging(image, op.magnitude, rng);
  if (op.name == "glasses") return glasses(image, op.magnitude, rng);
  if (op.name == "tint") return tint(image, op.magnitude, rng);
  return flip(image);
}

std::string to_string(SchemaTag tag) {
  switch (tag) {
    case SchemaTag::pair_plain: return "pair_plain";
    case SchemaTag::pair_id_edit: return "pair_id_edit";
    case SchemaTag::single_e: return "single_e";
    case SchemaTag::single_f: return "single_f";
    case SchemaTag::single_g: return "single_g";
    case SchemaTag::single_h: return "single_h";
  }
  return "?";
}

SchemaTag parse_schema(const std::string& name) {
  for (auto t : {SchemaTag::pair_plain, SchemaTag::pair_id_edit, SchemaTag::single_e, SchemaTag::single_f,
                 SchemaTag::single_g, SchemaTag::single_h}) {
    if (to_string(t) == name) return t;
  }
  throw SchemaError("unknown schema tag '" + name + "'");
}

Triplet pair_triplet(const LoadedImage& a, const LoadedImage& b, const EditOp& id_op, std::uint64_t seed) {
  if (a.record.identity_id != b.record.identity_id) {
    throw UsageError("pair triplet needs two images of one identity, got '" + a.record.identity_id + "' and '" +
                     b.record.identity_id + "'");
  }
  if (a.record.path == b.record.path) throw UsageError("pair triplet needs two distinct images");
  require_kind(id_op, EditKind::identity_edit, "pair identity-edit");
  Triplet t;
  t.tag = SchemaTag::pair_id_edit;
  t.source = a.pixels.detach();
  t.gt = b.pixels.detach();
  t.target = apply_edit(b.pixels, id_op, seed);
  t.identity_id = a.record.identity_id;
  t.seed = seed;
  return t;
}

std::array<Triplet, 4> single_image_triplets(const LoadedImage& img, const EditOp& id_op, const EditOp& attr_op,
                                             std::uint64_t seed) {
  require_kind(id_op, EditKind::identity_edit, "identity-edit");
  require_kind(attr_op, EditKind::attribute_edit, "attribute-edit");
  const Tensor<float> plain = img.pixels.detach();
  const Tensor<float> id_edit = apply_edit(img.pixels, id_op, seed);
  const Tensor<float> attr_edit = apply_edit(img.pixels, attr_op, seed);
  auto make = [&](SchemaTag tag, const Tensor<float>& s, const Tensor<float>& t, const Tensor<float>& g) {
    return Triplet{tag, s.detach(), t.detach(), g.detach(), img.record.identity_id, seed};
  };
  return {make(SchemaTag::single_e, plain, id_edit, plain), make(SchemaTag::single_f, plain, attr_edit, attr_edit),
          make(SchemaTag::single_g, id_edit, plain, id_edit), make(SchemaTag::single_h, attr_edit, plain, plain)};
}

void SampleConfig::validate() const {
  if (!(triplet_fraction >= 0.0 && triplet_fraction <= 1.0)) throw ConfigError("triplet_fraction must be in [0,1]");
  double total = 0;
  for (double w : schema_weights) {
    if (!(w >= 0.0)) throw ConfigError("schema weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("at least one schema weight must be positive");
  if (!(edit_magnitude >= 0.0)) throw ConfigError("edit magnitude must be nonnegative");
}

TripletDraw draw_triplet(const Dataset& data, const SampleConfig& cfg, std::mt19937_64& rng) {
  if (data.images.empty()) throw UsageError("cannot sample from an empty dataset");
  const std::size_t n = data.images.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  TripletDraw d;
  d.seed = rng();
  d.first = pick(rng);
  d.second = d.first;
  if (cfg.self_pairs) {
    d.tag = SchemaTag::single_e;
    d.op = make_edit("bulge", 0.0);
    return d;
  }
  const bool with_gt = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.triplet_fraction;
  if (!with_gt) {
    d.tag = SchemaTag::pair_plain;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.images[i].record.identity_id != data.images[d.first].record.identity_id) others.push_back(i);
    }
    if (others.empty()) {  // single-identity corpus: fall back to any other image
      for (std::size_t i = 0; i < n; ++i) {
        if (i != d.first) others.push_back(i);
      }
    }
    if (!others.empty()) d.second = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    return d;
  }
  // partners for pair_id_edit: same identity, different image
  std::vector<std::size_t> mates;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != d.first && data.images[i].record.identity_id == data.images[d.first].record.identity_id) mates.push_back(i);
  }
  auto weights = cfg.schema_weights;
  if (mates.empty()) weights[0] = 0.0;
  if (weights[1] + weights[2] + weights[3] + weights[4] + weights[0] <= 0.0) weights = {0, 1, 1, 1, 1};
  static constexpr SchemaTag order[] = {SchemaTag::pair_id_edit, SchemaTag::single_e, SchemaTag::single_f,
                                        SchemaTag::single_g, SchemaTag::single_h};
  d.tag = order[std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng)];
  const bool identity = d.tag == SchemaTag::pair_id_edit || d.tag == SchemaTag::single_e || d.tag == SchemaTag::single_g;
  const auto& names = identity ? identity_edit_names() : attribute_edit_names();
  d.op = make_edit(names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)], cfg.edit_magnitude);
  if (d.tag == SchemaTag::pair_id_edit) d.second = mates[std::uniform_int_distribution<std::size_t>(0, mates.size() - 1)(rng)];
  return d;
}

Triplet realize(const Dataset& data, const TripletDraw& d) {
  const auto& a = data.images.at(d.first);
  switch (d.tag) {
    case SchemaTag::pair_plain: {
      const auto& b = data.images.at(d.second);
      return Triplet{d.tag, a.pixels.detach(), b.pixels.detach(), std::nullopt, a.record.identity_id, d.seed};
    }
    case SchemaTag::pair_id_edit:
      return pair_triplet(a, data.images.at(d.second), d.op, d.seed);
    default: {
      const bool identity = d.op.kind == EditKind::identity_edit;
      const EditOp id_op = identity ? d.op : make_edit("bulge", 0.0);
      const EditOp attr_op = identity ? make_edit("flip", 0.0) : d.op;
      auto all = single_image_triplets(a, id_op, attr_op, d.seed);
      const auto idx = static_cast<std::size_t>(d.tag) - static_cast<std::size_t>(SchemaTag::single_e);
      return std::move(all[idx]);
    }
  }
}

Batch sample_batch(const Dataset& data, std::int64_t batch_size, const SampleConfig& cfg, std::mt19937_64& rng) {
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (data.images.empty()) throw UsageError("cannot sample from an empty dataset");
  cfg.validate();
  const Shape one = data.images.front().pixels.shape();
  const std::int64_t per = shape_numel(one);
  Batch b;
  b.source = Tensor<float>(Shape{batch_size, 3, one[2], one[3]});
  b.target = Tensor<float>(b.source.shape());
  b.gt = Tensor<float>(b.source.shape());
  for (std::int64_t i = 0; i < batch_size; ++i) {
    const auto t = realize(data, draw_triplet(data, cfg, rng));
    if (t.source.shape() != one || t.target.shape() != one) {
      throw DimensionError("dataset images must share one resolution to be batched");
    }
    auto copy = [&](Tensor<float>& dst, const Tensor<float>& src) {
      std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin() + i * per);
    };
    copy(b.source, t.source);
    copy(b.target, t.target);
    copy(b.gt, t.gt ? *t.gt : t.target);
    b.has_gt.push_back(t.gt ? 1.0f : 0.0f);
    b.tags.push_back(t.tag);
  }
  return b;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void check_field(const std::string& value, const std::string& what) {
  if (value.find_first_of("\t\n") != std::string::npos) throw Error(what + " contains a tab or newline");
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const std::vector<TripletRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << manifest_header << "\n";
  for (const auto& r : records) {
    for (const auto* f : {&r.source, &r.target, &r.identity_id}) check_field(*f, "manifest field");
    if (r.gt) check_field(*r.gt, "manifest field");
    if (r.tag != SchemaTag::pair_plain && !r.gt) throw SchemaError("schema " + to_string(r.tag) + " requires a gt");
    out << to_string(r.tag) << '\t' << r.source << '\t' << r.target << '\t' << (r.gt ? *r.gt : "-") << '\t'
        << r.identity_id << '\t' << r.seed << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<TripletRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<TripletRecord> out;
  std::string line;
  std::size_t n = 0;
  const std::string origin = path.string();
  if (!std::getline(in, line) || strip_cr(line) != manifest_header) {
    throw ParseError(origin + ": missing '" + std::string(manifest_header) + "' header", 1);
  }
  n = 1;
  while (std::getline(in, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 6) {
      throw ParseError(origin + ": expected 6 tab-separated fields, found " + std::to_string(f.size()), n);
    }
    TripletRecord r;
    try {
      r.tag = parse_schema(f[0]);
    } catch (const SchemaError& e) {
      throw ParseError(origin + ": " + e.what(), n);
    }
    r.source = f[1];
    r.target = f[2];
    if (f[3] != "-") r.gt = f[3];
    r.identity_id = f[4];
    try {
      std::size_t used = 0;
      r.seed = std::stoull(f[5], &used);
      if (used != f[5].size()) throw std::invalid_argument("seed");
    } catch (const std::exception&) {
      throw ParseError(origin + ": invalid seed '" + f[5] + "'", n);
    }
    if (r.tag != SchemaTag::pair_plain && !r.gt) throw ParseError(origin + ": schema " + f[0] + " requires a gt", n);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImageRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<ImageRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) throw ParseError(path.string() + ": expected path, identity_id, resolution", n);
    ImageRecord r{f[0], f[1], 0};
    try {
      r.resolution = std::stoll(f[2]);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": invalid resolution '" + f[2] + "'", n);
    }
    if (r.identity_id.empty()) throw ParseError(path.string() + ": empty identity_id", n);
    out.push_back(std::move(r));
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus " + path.string());
  out << "# path\tidentity_id\tresolution\n";
  for (const auto& r : records) out << r.path << '\t' << r.identity_id << '\t' << r.resolution << '\n';
}

Dataset load_corpus(const std::filesystem::path& corpus, std::int64_t resolution) {
  Dataset d;
  const auto base = corpus.parent_path();
  for (auto rec : read_corpus(corpus)) {
    const std::filesystem::path p(rec.path);
    rec.path = (p.is_absolute() ? p : base / p).lexically_normal().string();
    auto img = read_ppm(rec.path);
    if (resolution > 0 && (img.dim(2) != resolution || img.dim(3) != resolution)) {
      NoTapeScope off;
      img = resize_bilinear(img, resolution, resolution);
    }
    rec.resolution = img.dim(2);
    d.images.push_back(LoadedImage{std::move(rec), std::move(img)});
  }
  if (d.images.empty()) throw UsageError("corpus " + corpus.string() + " lists no images");
  return d;
}

std::vector<TripletRecord> forge_dataset(const Dataset& data, const ForgeOptions& opts) {
  if (data.images.empty()) throw UsageError("cannot forge from an empty dataset");
  std::filesystem::create_directories(opts.image_dir);
  std::vector<TripletRecord> out;
  auto save = [&](const Tensor<float>& img, const std::string& name) {
    const auto p = (opts.image_dir / name).string();
    write_ppm(p, img);
    return p;
  };
  std::map<std::string, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < data.images.size(); ++i) by_identity[data.images[i].record.identity_id].push_back(i);

  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const auto& img = data.images[i];
    std::mt19937_64 rng(mix_seed(opts.seed, i));
    const auto& idn = identity_edit_names();
    const auto& atn = attribute_edit_names();
    const auto id_op = make_edit(idn[rng() % idn.size()], opts.edit_magnitude);
    const auto attr_op = make_edit(atn[rng() % atn.size()], opts.edit_magnitude);
    const std::uint64_t seed = rng();
    const std::string stem = "img" + std::to_string(i);
    const auto id_path = save(apply_edit(img.pixels, id_op, seed), stem + "_" + id_op.name + ".ppm");
    const auto attr_path = save(apply_edit(img.pixels, attr_op, seed), stem + "_" + attr_op.name + ".ppm");
    const auto& src = img.record.path;
    const auto& id = img.record.identity_id;
    out.push_back({SchemaTag::single_e, src, id_path, src, id, seed});
    out.push_back({SchemaTag::single_f, src, attr_path, attr_path, id, seed});
    out.push_back({SchemaTag::single_g, id_path, src, id_path, id, seed});
    out.push_back({SchemaTag::single_h, attr_path, src, src, id, seed});
    if (opts.include_plain) {
      std::vector<std::size_t> others;
      for (std::size_t j = 0; j < data.images.size(); ++j) {
        if (data.images[j].record.identity_id != id) others.push_back(j);
      }
      if (!others.empty()) {
        const auto& partner = data.images[others[rng() % others.size()]];
        out.push_back({SchemaTag::pair_plain, src, partner.record.path, std::nullopt, id, seed});
      }
    }
  }
  std::size_t pair_index = 0;
  for (const auto& [id, members] : by_identity) {
    for (std::size_t k = 0; k + 1 < members.size(); ++k) {
      const auto& a = data.images[members[k]];
      const auto& b = data.images[members[k + 1]];
      std::mt19937_64 rng(mix_seed(opts.seed ^ 0x9E3779B97F4A7C15ULL, pair_index++));
      const auto& idn = identity_edit_names();
      const auto op = make_edit(idn[rng() % idn.size()], opts.edit_magnitude);
      const std::uint64_t seed = rng();
      const auto t = pair_triplet(a, b, op, seed);
      const auto target = save(t.target, "pair" + std::to_string(pair_index - 1) + "_" + op.name + ".ppm");
      out.push_back({SchemaTag::pair_id_edit, a.record.path, target, b.record.path, id, seed});
    }
  }
  return out;
}

}  // namespace litefs
