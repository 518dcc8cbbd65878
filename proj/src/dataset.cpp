#include "dcngan/dataset.hpp"

#include <algorithm>
#include <string>

#include "dcngan/archive.hpp"
#include "dcngan/batch.hpp"

namespace dcngan {

namespace {

constexpr const char* kSampleKind = "dcngan-samples";
constexpr int kSampleVersion = 1;

Tensor<float> gather(const Tensor<float>& t, const std::vector<int>& indices) {
  Shape shape = t.shape();
  const std::size_t stride = t.size() / static_cast<std::size_t>(shape[0]);
  shape[0] = static_cast<int>(indices.size());
  Tensor<float> out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const float* src = t.data() + static_cast<std::size_t>(indices[i]) * stride;
    std::copy(src, src + stride, out.data() + i * stride);
  }
  return out;
}

Tensor<float> concat_rows(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Shape shape = a.shape();
  Shape tail_a(shape.begin() + 1, shape.end()), tail_b(b.shape().begin() + 1, b.shape().end());
  if (tail_a != tail_b) throw ShapeError("sample sets differ in patch shape");
  shape[0] += b.dim(0);
  Tensor<float> out(shape);
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

}  // namespace

void SampleSet::append(const SampleSet& other) {
  raw = concat_rows(raw, other.raw);
  degraded = concat_rows(degraded, other.degraded);
  qp.insert(qp.end(), other.qp.begin(), other.qp.end());
  frame_index.insert(frame_index.end(), other.frame_index.begin(), other.frame_index.end());
}

SampleSet SampleSet::select(const std::vector<int>& indices) const {
  for (int i : indices) {
    if (i < 0 || i >= size()) throw ShapeError("sample index " + std::to_string(i) + " out of range");
  }
  SampleSet out;
  out.raw = gather(raw, indices);
  out.degraded = gather(degraded, indices);
  for (int i : indices) {
    out.qp.push_back(qp[static_cast<std::size_t>(i)]);
    out.frame_index.push_back(frame_index[static_cast<std::size_t>(i)]);
  }
  return out;
}

SampleSet to_sample_set(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw EmptyInputError("no samples");
  std::vector<const FrameTriplet*> triplets;
  std::vector<const LumaFrame*> targets;
  SampleSet set;
  for (const auto& s : samples) {
    triplets.push_back(&s.degraded);
    targets.push_back(&s.target);
    set.qp.push_back(s.qp.qp_value());
    set.frame_index.push_back(s.degraded.frame_index);
  }
  set.degraded = stack_triplets<float>(triplets);
  set.raw = stack_frames<float>(targets);
  if (set.raw.dim(2) != set.raw.dim(3)) throw InvalidPatchError("training patches must be square");
  return set;
}

void write_sample_cache(const std::filesystem::path& path, const SampleSet& set) {
  TensorArchive archive;
  archive.meta = {{"kind", kSampleKind}, {"version", kSampleVersion}, {"qp", set.qp}, {"frame_index", set.frame_index}};
  archive.add("raw", set.raw);
  archive.add("degraded", set.degraded);
  write_archive(path, archive);
}

SampleSet read_sample_cache(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path);
  if (archive.meta.value("kind", "") != kSampleKind || archive.meta.value("version", 0) != kSampleVersion) {
    throw MalformedInputError(path.string() + " is not a version-1 sample cache");
  }
  SampleSet set;
  set.qp = archive.meta.at("qp").get<std::vector<int>>();
  set.frame_index = archive.meta.at("frame_index").get<std::vector<int>>();
  set.raw = archive.get("raw");
  set.degraded = archive.get("degraded");
  const int n = set.size();
  if (set.raw.rank() != 4 || set.degraded.rank() != 4 || set.raw.dim(0) != n || set.degraded.dim(0) != n ||
      set.raw.dim(1) != 1 || set.degraded.dim(1) != 3 || set.raw.dim(2) != set.degraded.dim(2) ||
      set.raw.dim(3) != set.degraded.dim(3) || static_cast<int>(set.frame_index.size()) != n) {
    throw MalformedInputError(path.string() + ": inconsistent sample cache shapes");
  }
  return set;
}

std::filesystem::path split_path(const std::filesystem::path& dir, int qp) {
  return dir / ("qp" + std::to_string(qp) + ".dcns");
}

Batch make_batch(const SampleSet& set, const std::vector<int>& indices, const std::vector<int>& qp_set) {
  if (indices.empty()) throw EmptyInputError("empty batch");
  Batch batch;
  SampleSet part = set.select(indices);
  batch.planes = std::move(part.degraded);
  batch.target = std::move(part.raw);
  const int q = static_cast<int>(qp_set.size());
  batch.codes = Tensor<float>({static_cast<int>(indices.size()), q});
  for (std::size_t i = 0; i < part.qp.size(); ++i) {
    const QPCode code = encode_qp(part.qp[i], qp_set);
    for (int j = 0; j < q; ++j) batch.codes[i * static_cast<std::size_t>(q) + j] = code.onehot()[static_cast<std::size_t>(j)];
  }
  return batch;
}

Batch make_batch(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw EmptyInputError("empty batch");
  std::vector<const FrameTriplet*> triplets;
  std::vector<const LumaFrame*> targets;
  std::vector<const QPCode*> codes;
  for (const auto& s : samples) {
    triplets.push_back(&s.degraded);
    targets.push_back(&s.target);
    codes.push_back(&s.qp);
  }
  return {stack_triplets<float>(triplets), stack_qp_codes<float>(codes), stack_frames<float>(targets)};
}

SampleSet build_split(const std::vector<std::vector<LumaFrame>>& sequences, int qp, const PrepareConfig& config) {
  if (sequences.empty()) throw EmptyInputError("no sequences to sample");
  SampleSet split;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    std::vector<LumaFrame> degraded;
    for (const auto& f : sequences[i]) degraded.push_back(degrade(f, qp));
    PatchRequest req;
    req.patch = config.patch;
    req.count = config.patches_per_sequence;
    req.seed = config.seed + i;
    req.qp = qp;
    req.qp_set = &config.qp_set;
    split.append(to_sample_set(sample_patches(sequences[i], degraded, req)));
  }
  return split;
}

void prepare_dataset(const std::vector<std::vector<LumaFrame>>& sequences, const PrepareConfig& config,
                     const std::filesystem::path& dir) {
  validate_qp_set(config.qp_set);
  std::filesystem::create_directories(dir);
  for (int q : config.qp_set) write_sample_cache(split_path(dir, q), build_split(sequences, q, config));
}

std::vector<std::vector<LumaFrame>> synthetic_corpus(int count, const SyntheticVideoSpec& base) {
  std::vector<std::vector<LumaFrame>> out;
  for (int i = 0; i < count; ++i) {
    SyntheticVideoSpec spec = base;
    spec.seed = base.seed + static_cast<std::uint64_t>(i);
    out.push_back(synthesize_video(spec));
  }
  return out;
}

}  // namespace dcngan
