#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "litefs/tensor.hpp"

namespace litefs {

// ---- edit operators -------------------------------------------------------

enum class EditKind { identity_edit, attribute_edit };

// Builtin stand-ins: identity edits "bulge" (chubby warp) and "aging"
// (desaturation, contrast and texture); attribute edits "glasses", "tint"
// (background) and "flip" (horizontal). Magnitude 0 is an exact no-op.
struct EditOp {
  std::string name;
  EditKind kind = EditKind::identity_edit;
  double magnitude = 1.0;
};

EditOp make_edit(const std::string& name, double magnitude = 1.0);  // ConfigError on unknown names
const std::vector<std::string>& identity_edit_names();
const std::vector<std::string>& attribute_edit_names();

// Pure: same (image, op, seed) gives a bitwise-identical result; resolution and
// the [-1,1] range are preserved. `image` is [1,3,H,W].
Tensor<float> apply_edit(const Tensor<float>& image, const EditOp& op, std::uint64_t seed);

// ---- records and triplets -------------------------------------------------

struct ImageRecord {
  std::string path;
  std::string identity_id;
  std::int64_t resolution = 0;
};

struct LoadedImage {
  ImageRecord record;
  Tensor<float> pixels;  // [1,3,R,R]
};

enum class SchemaTag { pair_plain, pair_id_edit, single_e, single_f, single_g, single_h };

std::string to_string(SchemaTag tag);
SchemaTag parse_schema(const std::string& name);  // SchemaError on unknown tags

struct Triplet {
  SchemaTag tag = SchemaTag::pair_plain;
  Tensor<float> source;
  Tensor<float> target;
  std::optional<Tensor<float>> gt;
  std::string identity_id;
  std::uint64_t seed = 0;
};

// Two photos of one person: source = a, gt = b, target = op(b).
Triplet pair_triplet(const LoadedImage& a, const LoadedImage& b, const EditOp& id_op, std::uint64_t seed);

// Schemas e, f, g, h from one image: identity edits keep gt on the source
// side, attribute edits keep gt on the target side.
std::array<Triplet, 4> single_image_triplets(const LoadedImage& img, const EditOp& id_op, const EditOp& attr_op,
                                             std::uint64_t seed);

// ---- sampling ---------------------------------------------------------------

struct Dataset {
  std::vector<LoadedImage> images;
};

struct SampleConfig {
  double triplet_fraction = 0.4;
  // relative weights of pair_id_edit, single_e, single_f, single_g, single_h
  std::array<double, 5> schema_weights{1, 1, 1, 1, 1};
  double edit_magnitude = 1.0;
  // every sample is (img, img, img): a zero-magnitude schema-e triplet
  bool self_pairs = false;

  void validate() const;
};

struct TripletDraw {
  SchemaTag tag = SchemaTag::pair_plain;
  std::size_t first = 0;   // image index (source side for plain / pair schemas)
  std::size_t second = 0;  // partner image for pair schemas
  EditOp op;
  std::uint64_t seed = 0;
};

TripletDraw draw_triplet(const Dataset& data, const SampleConfig& cfg, std::mt19937_64& rng);
Triplet realize(const Dataset& data, const TripletDraw& draw);

struct Batch {
  Tensor<float> source;       // [B,3,R,R]
  Tensor<float> target;       // [B,3,R,R]
  Tensor<float> gt;           // [B,3,R,R]; rows without gt hold the target
  std::vector<float> has_gt;  // 1 where gt exists
  std::vector<SchemaTag> tags;
};

Batch sample_batch(const Dataset& data, std::int64_t batch_size, const SampleConfig& cfg, std::mt19937_64& rng);

// ---- manifest and corpus files ----------------------------------------------

inline constexpr const char* manifest_header = "#fstriplets v1";

struct TripletRecord {
  SchemaTag tag = SchemaTag::pair_plain;
  std::string source;
  std::string target;
  std::optional<std::string> gt;
  std::string identity_id;
  std::uint64_t seed = 0;

  bool operator==(const TripletRecord&) const = default;
};

void write_manifest(const std::filesystem::path& path, const std::vector<TripletRecord>& records);
std::vector<TripletRecord> read_manifest(const std::filesystem::path& path);  // ParseError with line number

// Corpus TSV: path, identity_id, resolution (lines starting with '#' ignored).
std::vector<ImageRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<ImageRecord>& records);

// Loads corpus images (paths relative to the corpus file's directory) and
// resizes them to `resolution` when it is nonzero.
Dataset load_corpus(const std::filesystem::path& corpus, std::int64_t resolution = 0);

struct ForgeOptions {
  std::uint64_t seed = 0;
  std::filesystem::path image_dir;  // where edited images are written
  double edit_magnitude = 1.0;
  bool include_plain = true;
};

// Deterministic offline forging: four single-image schemas per image, one
// pair_id_edit per consecutive same-identity pair, one plain cross-identity
// pair per image. Edited images are written as PPM under image_dir.
std::vector<TripletRecord> forge_dataset(const Dataset& data, const ForgeOptions& opts);

}  // namespace litefs
