#pragma once

// "FSWT" tensor archive: magic, u32 version, u32 count, then per tensor
// (u16 name_len, name, u8 dtype, u8 ndim, u64 dims[ndim], u64 offset) and a
// data section of little-endian values addressed by the offsets.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "litefs/tensor.hpp"

namespace litefs {

inline constexpr std::uint32_t weights_format_version = 1;

struct WeightRecord {
  std::string name;
  DType dtype = DType::f32;
  Shape shape;
  std::vector<double> values;  // widened for uniform handling; f32 values round-trip exactly
};

template <typename T>
void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& tensors);

void save_weight_records(const std::filesystem::path& path, const std::vector<WeightRecord>& records);

// Parses and validates the whole archive; throws LoadError on any defect.
std::vector<WeightRecord> read_weights(const std::filesystem::path& path);

// Copies archive values into `targets` by name. Every target must be present
// with the same shape; with `strict`, extra archive entries are rejected too.
template <typename T>
void load_weights_into(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& targets,
                       bool strict = true);

template <typename T>
void assign_records(const std::vector<WeightRecord>& records, const std::vector<NamedTensor<T>>& targets,
                    bool strict, const std::string& origin);

}  // namespace litefs
