#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcngan/adam.hpp"
#include "dcngan/config.hpp"
#include "dcngan/dataset.hpp"
#include "dcngan/discriminator.hpp"
#include "dcngan/generator.hpp"
#include "dcngan/losses.hpp"

namespace dcngan {

struct TrainingConfig {
  int batch_size = 32;
  AdamConfig adam;
  int steps = 0;
  std::uint64_t seed = 0;
  // QPs whose samples are trained on. The QP code alphabet is model.qp_set,
  // so a single-QP specialist still uses full-length codes.
  std::vector<int> qp_set = kDefaultQpSet;
  int patch = 128;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  std::string dataset_dir;   // holds qp<q>.dcns per trained QP
  std::string out_dir;
  LossWeights weights;
  ModelConfig model;
  VggConfig vgg;

  void validate() const;
  // CPU-sized run: desk model, patch 64, batch 8, 2000 steps.
  static TrainingConfig desk();
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
TrainingConfig load_training_config(const std::filesystem::path& path);

// Epoch-wise reshuffled sample order driven by one seeded engine.
class BatchSchedule {
 public:
  BatchSchedule() = default;
  BatchSchedule(int dataset_size, std::uint64_t seed);

  std::vector<int> next(int batch_size);

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  void reshuffle();

  std::mt19937_64 engine_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
};

// Alternating LSGAN optimization of the generator and patch discriminator.
class Trainer {
 public:
  // `data` may be empty when only train_step() on explicit batches is used.
  Trainer(const TrainingConfig& config, SampleSet data = {});

  // One discriminator update on (target, detached G output), then one
  // generator update on gan + vgg + fm. Throws TrainingDivergenceError
  // naming the step and the term on a non-finite loss.
  LossReport train_step(const Batch& batch);
  LossReport train_step(const std::vector<TrainingSample>& batch) { return train_step(make_batch(batch)); }
  // Next batch from the seeded schedule.
  LossReport train_next();

  std::int64_t step() const { return step_; }
  const TrainingConfig& config() const { return config_; }
  Generator<float>& generator() { return *generator_; }
  Discriminator<float>& discriminator() { return *discriminator_; }
  const FeatureExtractor<float>& feature_extractor() const { return *vgg_; }
  const SampleSet& data() const { return data_; }

  TensorArchive checkpoint() const;
  void save(const std::filesystem::path& path) const;
  // Restores parameters, optimizer moments, step and schedule state. The
  // checkpoint's model config must match this trainer's.
  void restore(const TensorArchive& archive);
  void load(const std::filesystem::path& path) { restore(read_archive(path)); }

 private:
  TrainingConfig config_;
  SampleSet data_;
  std::unique_ptr<Generator<float>> generator_;
  std::unique_ptr<Discriminator<float>> discriminator_;
  std::unique_ptr<Vgg19Extractor<float>> vgg_;
  nn::ParamList<float> g_params_, d_params_;
  std::unique_ptr<Adam<float>> g_opt_, d_opt_;
  BatchSchedule schedule_;
  std::int64_t step_ = 0;
};

// Loads every split named by config.qp_set; ConfigError if one is missing.
SampleSet load_training_data(const TrainingConfig& config);

inline constexpr const char* kLossLogName = "losses.csv";
inline constexpr const char* kFinalCheckpointName = "final.dcnc";
std::string checkpoint_name(std::int64_t step);  // step_000100.dcnc

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  // Called after each step; for progress output.
  std::function<void(std::int64_t, const LossReport&)> on_step;
};

// Full run: validates the config and data, trains config.steps steps,
// writes out_dir/losses.csv, periodic checkpoints and out_dir/final.dcnc.
// Returns the path of the final checkpoint.
std::filesystem::path train(const TrainingConfig& config, const TrainOptions& options = {});

// Generator in eval mode from a checkpoint; shapes are checked against the
// stored model config.
std::unique_ptr<Generator<float>> load_generator(const std::filesystem::path& path);
ModelConfig checkpoint_model_config(const TensorArchive& archive);

}  // namespace dcngan
