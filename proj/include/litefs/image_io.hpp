#pragma once

#include <filesystem>
#include <vector>

#include "litefs/tensor.hpp"

namespace litefs {

// Binary PPM (P6, maxval 255) as a [1,3,H,W] tensor with x/127.5 - 1 values.
Tensor<float> read_ppm(const std::filesystem::path& path);

// Clamps to [-1,1], maps back to bytes by rounding, writes P6.
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);

// Byte value for one normalized sample (the inverse of x/127.5 - 1).
unsigned char to_byte(float v);

// Tiles [B,3,H,W] images into a grid of `cols` columns (background -1).
Tensor<float> image_grid(const std::vector<Tensor<float>>& rows_of_images, std::int64_t pad = 2);

// PSNR in dB between two images in [-1,1], measured on the 8-bit scale.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

}  // namespace litefs
