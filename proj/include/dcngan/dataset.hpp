#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dcngan/frames.hpp"
#include "dcngan/tensor.hpp"

namespace dcngan {

// Dense patch set: raw targets [N, 1, P, P], degraded triplets [N, 3, P, P]
// and the QP each sample was degraded at.
struct SampleSet {
  Tensor<float> raw;
  Tensor<float> degraded;
  std::vector<int> qp;
  std::vector<int> frame_index;

  int size() const { return static_cast<int>(qp.size()); }
  int patch() const { return raw.empty() ? 0 : raw.dim(2); }
  void append(const SampleSet& other);
  SampleSet select(const std::vector<int>& indices) const;
};

SampleSet to_sample_set(const std::vector<TrainingSample>& samples);

// Sample cache file: a tensor archive holding "raw" and "degraded" plus
// {"kind": "dcngan-samples", "version": 1, "qp": [...], "frame_index": [...]}.
void write_sample_cache(const std::filesystem::path& path, const SampleSet& set);
SampleSet read_sample_cache(const std::filesystem::path& path);

// <dir>/qp<q>.dcns
std::filesystem::path split_path(const std::filesystem::path& dir, int qp);

// Generator inputs for a subset of a sample set.
struct Batch {
  Tensor<float> planes;  // [B, 3, P, P]
  Tensor<float> codes;   // [B, |Q|]
  Tensor<float> target;  // [B, 1, P, P]
};

// Throws UnsupportedQpError for a sample whose QP is outside qp_set.
Batch make_batch(const SampleSet& set, const std::vector<int>& indices, const std::vector<int>& qp_set);
Batch make_batch(const std::vector<TrainingSample>& samples);

struct PrepareConfig {
  std::vector<int> qp_set = kDefaultQpSet;
  int patch = 128;
  int patches_per_sequence = 32;
  std::uint64_t seed = 0;
};

// Degrades every sequence at q and crops patches_per_sequence patches per
// sequence. Crop positions depend on (seed, sequence index) only, so every
// QP split holds the same windows.
SampleSet build_split(const std::vector<std::vector<LumaFrame>>& sequences, int qp, const PrepareConfig& config);
// Writes split_path(dir, q) for each q in config.qp_set.
void prepare_dataset(const std::vector<std::vector<LumaFrame>>& sequences, const PrepareConfig& config,
                     const std::filesystem::path& dir);

// `count` synthetic sequences seeded base.seed, base.seed + 1, ...
std::vector<std::vector<LumaFrame>> synthetic_corpus(int count, const SyntheticVideoSpec& base);

}  // namespace dcngan
