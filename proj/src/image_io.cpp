#include "litefs/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "litefs/errors.hpp"

namespace litefs {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

unsigned char to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
  return static_cast<unsigned char>(std::lround((c + 1.0) * 127.5));
}

Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  if (header_token(in) != "P6") throw IoError(path.string() + ": not a binary PPM (P6)");
  std::int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(header_token(in));
    h = std::stoll(header_token(in));
    maxval = std::stoll(header_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported PPM geometry or maxval");
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(path.string() + ": truncated PPM data");
  Tensor<float> img(Shape{1, 3, h, w});
  auto v = img.mutable_values();
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) {
        v[(c * h + y) * w + x] = static_cast<float>(raw[(y * w + x) * 3 + c]) / 127.5f - 1.0f;
      }
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw DimensionError("write_ppm expects [1,3,H,W], got " + shape_string(image.shape()));
  }
  const std::int64_t h = image.dim(2), w = image.dim(3);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * 3));
  const auto v = image.values();
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) raw[(y * w + x) * 3 + c] = to_byte(v[(c * h + y) * w + x]);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor<float> image_grid(const std::vector<Tensor<float>>& rows, std::int64_t pad) {
  std::int64_t cell = 0, cols = 0;
  for (const auto& r : rows) {
    if (r.rank() != 4 || r.dim(1) != 3) throw DimensionError("image_grid expects [B,3,H,W] rows");
    cell = std::max({cell, r.dim(2), r.dim(3)});
    cols = std::max(cols, r.dim(0));
  }
  const std::int64_t n_rows = static_cast<std::int64_t>(rows.size());
  const std::int64_t gh = n_rows * (cell + pad) + pad, gw = cols * (cell + pad) + pad;
  Tensor<float> grid(Shape{1, 3, gh, gw}, -1.0f);
  auto g = grid.mutable_values();
  for (std::int64_t r = 0; r < n_rows; ++r) {
    const auto& img = rows[r];
    const std::int64_t h = img.dim(2), w = img.dim(3);
    for (std::int64_t b = 0; b < img.dim(0); ++b) {
      const std::int64_t oy = pad + r * (cell + pad), ox = pad + b * (cell + pad);
      for (std::int64_t c = 0; c < 3; ++c) {
        for (std::int64_t y = 0; y < h; ++y) {
          for (std::int64_t x = 0; x < w; ++x) {
            g[(c * gh + oy + y) * gw + ox + x] = img.values()[((b * 3 + c) * h + y) * w + x];
          }
        }
      }
    }
  }
  return grid;
}

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape()) throw DimensionError("psnr: shapes differ");
  double se = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = static_cast<double>(to_byte(a.values()[i])) - to_byte(b.values()[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace litefs
