#pragma once

#include <array>
#include <filesystem>
#include <span>

#include "litefs/tensor.hpp"

namespace litefs {

struct Point {
  double x = 0;
  double y = 0;
};

// Left eye, right eye, nose tip, left mouth corner, right mouth corner, in
// pixel coordinates (pixel centers at integer positions).
using Landmarks5 = std::array<Point, 5>;

// The common 112x112 five-point template rescaled to `size`.
Landmarks5 canonical_template(std::int64_t size);

// p -> (a x - b y + tx, b x + a y + ty): rotation + uniform scale + translation.
struct Similarity {
  double a = 1, b = 0, tx = 0, ty = 0;

  Point apply(Point p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  Similarity inverse() const;
  double scale() const;
  double angle() const;
};

// Least-squares similarity mapping src onto dst (no reflection).
Similarity estimate_similarity(std::span<const Point> src, std::span<const Point> dst);

// Exact similarity carrying (s0, s1) onto (d0, d1).
Similarity two_point_similarity(Point s0, Point s1, Point d0, Point d1);

// Checks bounds and non-degeneracy; throws AlignmentError.
void validate_landmarks(const Landmarks5& lm, std::int64_t width, std::int64_t height);

// Output pixel q samples the input at out_to_in(q), bilinearly; samples
// outside the input read `fill`.
Tensor<float> warp_image(const Tensor<float>& image, const Similarity& out_to_in, std::int64_t out_size,
                         float fill = -1.0f);

// Fits the similarity landmarks -> template, warps and crops to size x size.
Tensor<float> align_face(const Tensor<float>& image, const Landmarks5& lm, std::int64_t size = 256);
Tensor<float> align_face(const Tensor<float>& image, const Landmarks5& lm, const Landmarks5& templ,
                         std::int64_t size);

// Text format: five lines "x y" (blank lines and '#' comments ignored).
Landmarks5 read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const Landmarks5& lm);

}  // namespace litefs
