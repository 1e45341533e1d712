// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/tensor_archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "dlens/error.hpp"

namespace dlens {
namespace {

DType parse_dtype(const std::string& s, const std::string& tensor) {
  if (s == "F32") return DType::kF32;
  if (s == "F16") return DType::kF16;
  if (s == "BF16") return DType::kBF16;
  if (s == "F64") return DType::kF64;
  throw LoadError("tensor '" + tensor + "': unsupported dtype " + s);
}

std::uint64_t read_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF16:
    case DType::kBF16: return 2;
    case DType::kF64: return 8;
  }
  return 0;
}

std::int64_t TensorInfo::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::int64_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FFu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

float bfloat16_to_float(std::uint16_t b) { return std::bit_cast<float>(static_cast<std::uint32_t>(b) << 16); }

TensorArchive TensorArchive::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weight archive " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (file_size < 8) throw LoadError(path.string() + ": truncated archive (no header length)");
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  const std::uint64_t header_len = read_le64(len_bytes);
  if (header_len > file_size - 8) throw LoadError(path.string() + ": truncated archive (header exceeds file)");

  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": malformed archive header: " + e.what());
  }
  if (!j.is_object()) throw LoadError(path.string() + ": archive header is not a JSON object");

  TensorArchive archive;
  archive.path_ = path;
  archive.data_start_ = 8 + header_len;
  const std::size_t data_size = file_size - archive.data_start_;
  for (const auto& [name, entry] : j.items()) {
    if (name == "__metadata__") {
      for (const auto& [k, v] : entry.items()) {
        if (v.is_string()) archive.metadata_[k] = v.get<std::string>();
      }
      continue;
    }
    try {
      TensorInfo info;
      info.name = name;
      info.dtype = parse_dtype(entry.at("dtype").get<std::string>(), name);
      info.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
      if (offsets.size() != 2 || offsets[1] < offsets[0]) throw LoadError("tensor '" + name + "': bad data_offsets");
      info.begin = offsets[0];
      info.end = offsets[1];
      if (info.end > data_size) throw LoadError(path.string() + ": truncated archive (tensor '" + name + "' past end of file)");
      if (static_cast<std::size_t>(info.numel()) * dtype_size(info.dtype) != info.end - info.begin) {
        throw LoadError("tensor '" + name + "': byte size does not match shape and dtype");
      }
      archive.tensors_.push_back(std::move(info));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ": malformed entry for tensor '" + name + "': " + e.what());
    }
  }
  std::sort(archive.tensors_.begin(), archive.tensors_.end(),
            [](const TensorInfo& a, const TensorInfo& b) { return a.name < b.name; });
  return archive;
}

const TensorInfo* TensorArchive::find(const std::string& name) const {
  auto it = std::lower_bound(tensors_.begin(), tensors_.end(), name,
                             [](const TensorInfo& t, const std::string& n) { return t.name < n; });
  return it != tensors_.end() && it->name == name ? &*it : nullptr;
}

Tensor TensorArchive::read(const std::string& name) const {
  const TensorInfo* info = find(name);
  if (info == nullptr) throw LoadError(path_.string() + ": no tensor named '" + name + "'");
  return read(*info);
}

Tensor TensorArchive::read(const TensorInfo& info) const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw LoadError("cannot reopen weight archive " + path_.string());
  const std::size_t nbytes = info.end - info.begin;
  std::vector<unsigned char> raw(nbytes);
  in.seekg(static_cast<std::streamoff>(data_start_ + info.begin));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(nbytes));
  if (static_cast<std::size_t>(in.gcount()) != nbytes) {
    throw LoadError(path_.string() + ": truncated archive while reading '" + info.name + "'");
  }

  Tensor t;
  t.shape = info.shape;
  const auto n = static_cast<std::size_t>(info.numel());
  t.data.resize(n);
  // Archive data is little-endian; this reader assumes a little-endian host.
  switch (info.dtype) {
    case DType::kF32:
      std::memcpy(t.data.data(), raw.data(), nbytes);
      break;
    case DType::kF64:
      for (std::size_t i = 0; i < n; ++i) {
        double d;
        std::memcpy(&d, raw.data() + 8 * i, 8);
        t.data[i] = static_cast<float>(d);
      }
      break;
    case DType::kF16:
    case DType::kBF16:
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t bits = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        t.data[i] = info.dtype == DType::kF16 ? half_to_float(bits) : bfloat16_to_float(bits);
      }
      break;
  }
  return t;
}

NamedTensors TensorArchive::read_all() const {
  NamedTensors out;
  for (const auto& info : tensors_) out.emplace(info.name, read(info));
  return out;
}

void write_tensor_archive(const std::filesystem::path& path, const NamedTensors& tensors,
                          const std::map<std::string, std::string>& metadata) {
  nlohmann::json header = nlohmann::json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (static_cast<std::size_t>(t.numel()) != t.data.size()) {
      throw InvalidArgument("tensor '" + name + "': data length does not match shape");
    }
    const std::size_t nbytes = t.data.size() * sizeof(float);
    header[name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + nbytes}}};
    offset += nbytes;
  }
  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  std::uint64_t len = text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw LoadError("failed writing " + path.string());
}

}  // namespace dlens
