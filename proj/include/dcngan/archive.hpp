#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcngan/tensor.hpp"

namespace dcngan {

// Single-file container of named float32 tensors plus a JSON metadata block.
//
// Layout (all integers little-endian):
//   8 bytes   magic "DCNGTNS\0"
//   u32       format version (1)
//   u64       header length L
//   L bytes   UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset"}...]}
//   ...       float32 little-endian payload; "offset" counts bytes from the payload start
struct TensorArchive {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  void add(std::string name, Tensor<float> t) { tensors.emplace_back(std::move(name), std::move(t)); }
  bool contains(const std::string& name) const;
  // Throws CheckpointError if absent or (when given) the shape differs.
  const Tensor<float>& get(const std::string& name) const;
  const Tensor<float>& get(const std::string& name, const Shape& expected) const;
};

std::vector<std::uint8_t> serialize_archive(const TensorArchive& archive);
TensorArchive deserialize_archive(const std::vector<std::uint8_t>& bytes);

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace dcngan
