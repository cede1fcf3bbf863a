#include "litefs/alignment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "litefs/errors.hpp"

namespace litefs {

Landmarks5 canonical_template(std::int64_t size) {
  static constexpr Landmarks5 base{{{38.2946, 51.6963},
                                    {73.5318, 51.5014},
                                    {56.0252, 71.7366},
                                    {41.5493, 92.3655},
                                    {70.7299, 92.2041}}};
  const double s = static_cast<double>(size) / 112.0;
  Landmarks5 out;
  for (std::size_t i = 0; i < 5; ++i) out[i] = {base[i].x * s, base[i].y * s};
  return out;
}

Similarity Similarity::inverse() const {
  const double d = a * a + b * b;
  if (d == 0.0) throw AlignmentError("similarity transform is singular");
  Similarity inv;
  inv.a = a / d;
  inv.b = -b / d;
  const Point t = inv.apply({-tx, -ty});
  inv.tx = t.x;
  inv.ty = t.y;
  return inv;
}

double Similarity::scale() const { return std::hypot(a, b); }
double Similarity::angle() const { return std::atan2(b, a); }

Similarity estimate_similarity(std::span<const Point> src, std::span<const Point> dst) {
  if (src.size() != dst.size() || src.size() < 2) throw AlignmentError("need at least two point correspondences");
  const double n = static_cast<double>(src.size());
  Point ms, md;
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms.x += src[i].x / n;
    ms.y += src[i].y / n;
    md.x += dst[i].x / n;
    md.y += dst[i].y / n;
  }
  // In complex form z -> c z + t; the least-squares c is <s~, d~> / |s~|^2.
  double re = 0, im = 0, norm = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double sx = src[i].x - ms.x, sy = src[i].y - ms.y;
    const double dx = dst[i].x - md.x, dy = dst[i].y - md.y;
    re += sx * dx + sy * dy;
    im += sx * dy - sy * dx;
    norm += sx * sx + sy * sy;
  }
  if (norm < 1e-12) throw AlignmentError("degenerate landmarks: zero spread");
  Similarity s;
  s.a = re / norm;
  s.b = im / norm;
  const Point m = s.apply(ms);  // translation still zero here
  s.tx = md.x - m.x;
  s.ty = md.y - m.y;
  return s;
}

Similarity two_point_similarity(Point s0, Point s1, Point d0, Point d1) {
  const double sx = s1.x - s0.x, sy = s1.y - s0.y;
  const double dx = d1.x - d0.x, dy = d1.y - d0.y;
  const double n = sx * sx + sy * sy;
  if (n == 0.0) throw AlignmentError("degenerate landmarks: coincident points");
  Similarity s;
  s.a = (sx * dx + sy * dy) / n;
  s.b = (sx * dy - sy * dx) / n;
  s.tx = d0.x - (s.a * s0.x - s.b * s0.y);
  s.ty = d0.y - (s.b * s0.x + s.a * s0.y);
  return s;
}

void validate_landmarks(const Landmarks5& lm, std::int64_t width, std::int64_t height) {
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& p = lm[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > width - 1 || p.y > height - 1) {
      throw AlignmentError("landmark " + std::to_string(i) + " lies outside the image");
    }
  }
  if (std::hypot(lm[1].x - lm[0].x, lm[1].y - lm[0].y) < 1e-6) throw AlignmentError("degenerate landmarks: eyes coincide");
}

Tensor<float> warp_image(const Tensor<float>& image, const Similarity& out_to_in, std::int64_t out_size, float fill) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw DimensionError("warp expects [1,3,H,W], got " + shape_string(image.shape()));
  }
  const std::int64_t h = image.dim(2), w = image.dim(3);
  Tensor<float> out(Shape{1, 3, out_size, out_size});
  auto o = out.mutable_values();
  const auto in = image.values();
  auto at = [&](std::int64_t c, std::int64_t y, std::int64_t x) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return fill;
    return in[(c * h + y) * w + x];
  };
  for (std::int64_t qy = 0; qy < out_size; ++qy) {
    for (std::int64_t qx = 0; qx < out_size; ++qx) {
      const Point p = out_to_in.apply({static_cast<double>(qx), static_cast<double>(qy)});
      const double fx = std::floor(p.x), fy = std::floor(p.y);
      const double wx = p.x - fx, wy = p.y - fy;
      const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
      for (std::int64_t c = 0; c < 3; ++c) {
        const double top = at(c, y0, x0) * (1 - wx) + (wx > 0 ? at(c, y0, x0 + 1) * wx : 0.0);
        const double bot = wy > 0 ? at(c, y0 + 1, x0) * (1 - wx) + (wx > 0 ? at(c, y0 + 1, x0 + 1) * wx : 0.0) : 0.0;
        o[(c * out_size + qy) * out_size + qx] = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Tensor<float> align_face(const Tensor<float>& image, const Landmarks5& lm, const Landmarks5& templ,
                         std::int64_t size) {
  if (image.rank() != 4) throw DimensionError("align_face expects [1,3,H,W]");
  validate_landmarks(lm, image.dim(3), image.dim(2));
  const auto in_to_out = estimate_similarity(lm, templ);
  return warp_image(image, in_to_out.inverse(), size);
}

Tensor<float> align_face(const Tensor<float>& image, const Landmarks5& lm, std::int64_t size) {
  return align_face(image, lm, canonical_template(size), size);
}

Landmarks5 read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmarks file " + path.string());
  Landmarks5 lm;
  std::size_t count = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Point p;
    std::string extra;
    if (!(ss >> p.x >> p.y) || (ss >> extra)) throw ParseError(path.string() + ": expected 'x y'", line_no);
    if (count == 5) throw ParseError(path.string() + ": more than five landmarks", line_no);
    lm[count++] = p;
  }
  if (count != 5) throw ParseError(path.string() + ": expected five landmarks, found " + std::to_string(count), line_no);
  return lm;
}

void write_landmarks(const std::filesystem::path& path, const Landmarks5& lm) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write landmarks file " + path.string());
  out << std::setprecision(17);
  for (const auto& p : lm) out << p.x << " " << p.y << "\n";
}

}  // namespace litefs
