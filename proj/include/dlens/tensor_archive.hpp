// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dlens {

enum class DType { kF32, kF16, kBF16, kF64 };

std::size_t dtype_size(DType dtype);

struct TensorInfo {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::int64_t> shape;
  std::size_t begin = 0;  // byte offsets relative to the data section
  std::size_t end = 0;

  std::int64_t numel() const;
};

/// Dense row-major float32 tensor.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
};

using NamedTensors = std::map<std::string, Tensor>;

/// Reader for the flat tensor archive layout: an 8-byte little-endian header
/// length, a JSON header mapping tensor names to {dtype, shape, data_offsets},
/// then the raw row-major tensor bytes. Only the header is kept in memory;
/// tensors are read on demand and widened to float32.
class TensorArchive {
 public:
  static TensorArchive open(const std::filesystem::path& path);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo* find(const std::string& name) const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  const std::filesystem::path& path() const { return path_; }

  Tensor read(const TensorInfo& info) const;
  Tensor read(const std::string& name) const;
  NamedTensors read_all() const;

 private:
  std::filesystem::path path_;
  std::size_t data_start_ = 0;
  std::vector<TensorInfo> tensors_;
  std::map<std::string, std::string> metadata_;
};

/// Writes float32 tensors in the archive layout (used for fixtures and tools).
void write_tensor_archive(const std::filesystem::path& path, const NamedTensors& tensors,
                          const std::map<std::string, std::string>& metadata = {});

float half_to_float(std::uint16_t bits);
float bfloat16_to_float(std::uint16_t bits);

}  // namespace dlens
