#include "dcngan/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace dcngan {

namespace {

constexpr const char* kCheckpointKind = "dcngan-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr std::uint64_t kDiscriminatorSeedSalt = 0x9e3779b97f4a7c15ULL;

void check_finite(double v, const char* term, std::int64_t step) {
  if (!std::isfinite(v)) {
    throw TrainingDivergenceError("step " + std::to_string(step) + ": non-finite " + term);
  }
}

std::string format_row(std::int64_t step, const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(step), r.l_gan_g, r.l_gan_d,
                r.l_vgg, r.l_fm, r.total_g);
  return buf;
}

constexpr const char* kLossUnits = "# units: step = optimizer iterations (0-based); losses are unitless";
constexpr const char* kLossHeader = "step,l_gan_g,l_gan_d,l_vgg,l_fm,total_g";

}  // namespace

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.lr >= 0) || !std::isfinite(adam.lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0)) {
    throw ConfigError("Adam betas must lie in [0,1) and eps must be > 0");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (qp_set.empty()) throw ConfigError("qp_set is empty");
  model.validate();
  vgg.validate();
  for (int q : qp_set) {
    if (q < 0 || q > 51) throw ConfigError("qp " + std::to_string(q) + " outside [0, 51]");
    if (std::find(model.qp_set.begin(), model.qp_set.end(), q) == model.qp_set.end()) {
      throw ConfigError("trained qp " + std::to_string(q) + " is not in the model's QP set");
    }
  }
  const int min_patch = std::max(Discriminator<float>::min_input_size(), 16);
  if (patch < min_patch) throw ConfigError("patch must be at least " + std::to_string(min_patch));
}

TrainingConfig TrainingConfig::desk() {
  TrainingConfig c;
  c.batch_size = 8;
  c.patch = 64;
  c.steps = 2000;
  c.model = ModelConfig::desk();
  c.vgg = VggConfig::desk();
  return c;
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"lr", c.adam.lr},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"eps", c.adam.eps},
                     {"steps", c.steps},
                     {"seed", c.seed},
                     {"qp_set", c.qp_set},
                     {"patch", c.patch},
                     {"checkpoint_every", c.checkpoint_every},
                     {"dataset_dir", c.dataset_dir},
                     {"out_dir", c.out_dir},
                     {"loss_weights", {{"gan", c.weights.gan}, {"vgg", c.weights.vgg}, {"fm", c.weights.fm}}},
                     {"model", c.model},
                     {"vgg", c.vgg}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
  const bool desk = j.value("preset", std::string()) == "desk";
  const TrainingConfig d = desk ? TrainingConfig::desk() : TrainingConfig{};
  c.batch_size = j.value("batch_size", d.batch_size);
  c.adam.lr = j.value("lr", d.adam.lr);
  c.adam.beta1 = j.value("beta1", d.adam.beta1);
  c.adam.beta2 = j.value("beta2", d.adam.beta2);
  c.adam.eps = j.value("eps", d.adam.eps);
  c.steps = j.value("steps", d.steps);
  c.seed = j.value("seed", d.seed);
  c.qp_set = j.value("qp_set", d.qp_set);
  c.patch = j.value("patch", d.patch);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.dataset_dir = j.value("dataset_dir", d.dataset_dir);
  c.out_dir = j.value("out_dir", d.out_dir);
  c.weights = d.weights;
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    c.weights.gan = w.value("gan", d.weights.gan);
    c.weights.vgg = w.value("vgg", d.weights.vgg);
    c.weights.fm = w.value("fm", d.weights.fm);
  }
  c.model = d.model;
  c.vgg = d.vgg;
  if (j.contains("model")) {
    nlohmann::json m = nlohmann::json(d.model);
    m.update(j.at("model"));
    c.model = m.get<ModelConfig>();
  }
  if (j.contains("vgg")) {
    nlohmann::json v = nlohmann::json(d.vgg);
    v.update(j.at("vgg"));
    c.vgg = v.get<VggConfig>();
  }
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in).get<TrainingConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

BatchSchedule::BatchSchedule(int dataset_size, std::uint64_t seed) : engine_(seed), order_(static_cast<std::size_t>(dataset_size)) {
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

void BatchSchedule::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), engine_);
  cursor_ = 0;
}

std::vector<int> BatchSchedule::next(int batch_size) {
  if (order_.empty()) throw EmptyInputError("batch schedule over an empty dataset");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  while (static_cast<int>(out.size()) < batch_size) {
    if (cursor_ == order_.size()) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

nlohmann::json BatchSchedule::state() const {
  std::ostringstream engine;
  engine << engine_;
  return {{"engine", engine.str()}, {"order", order_}, {"cursor", cursor_}};
}

void BatchSchedule::restore(const nlohmann::json& state) {
  std::istringstream engine(state.at("engine").get<std::string>());
  engine >> engine_;
  if (!engine) throw CheckpointError("corrupt batch schedule state");
  order_ = state.at("order").get<std::vector<int>>();
  cursor_ = state.at("cursor").get<std::size_t>();
  if (cursor_ > order_.size()) throw CheckpointError("corrupt batch schedule cursor");
}

Trainer::Trainer(const TrainingConfig& config, SampleSet data) : config_(config), data_(std::move(data)) {
  config_.validate();
  generator_ = std::make_unique<Generator<float>>(config_.model, config_.seed);
  discriminator_ = std::make_unique<Discriminator<float>>(config_.model.disc_base, config_.seed ^ kDiscriminatorSeedSalt);
  vgg_ = make_vgg<float>(config_.vgg);
  g_params_ = generator_->parameters();
  d_params_ = discriminator_->parameters();
  g_opt_ = std::make_unique<Adam<float>>(g_params_, config_.adam);
  d_opt_ = std::make_unique<Adam<float>>(d_params_, config_.adam);
  if (data_.size() > 0) {
    for (int q : data_.qp) encode_qp(q, config_.model.qp_set);
    schedule_ = BatchSchedule(data_.size(), config_.seed);
  }
}

LossReport Trainer::train_step(const Batch& batch) {
  const int n = batch.planes.rank() == 4 ? batch.planes.dim(0) : 0;
  if (n == 0) throw EmptyInputError("empty training batch");
  if (batch.target.rank() != 4 || batch.target.dim(0) != n || batch.codes.rank() != 2 || batch.codes.dim(0) != n ||
      batch.target.dim(2) != batch.planes.dim(2) || batch.target.dim(3) != batch.planes.dim(3)) {
    throw ShapeError("inconsistent training batch shapes");
  }
  LossReport report;
  const Var<float> planes(batch.planes), codes(batch.codes), target(batch.target);

  d_params_.set_requires_grad(true);
  const Var<float> fake = generator_->forward(planes, codes, nn::Mode::kTrain);

  // Discriminator update on detached generator output.
  {
    const auto real_scores = discriminator_->discriminate(target);
    const auto fake_scores = discriminator_->discriminate(fake.detach());
    const Var<float> l_d = gan_loss_d(real_scores, fake_scores);
    report.l_gan_d = l_d.item();
    check_finite(report.l_gan_d, "l_gan_d", step_);
    d_opt_->zero_grad();
    backward(l_d);
    d_opt_->step();
  }

  // Generator update against the refreshed discriminator.
  d_params_.set_requires_grad(false);
  FeatureStack<float> real_features;
  {
    NoGradGuard no_grad;
    real_features = discriminator_->extract_features(target);
  }
  const auto fake_out = discriminator_->forward(fake);
  const Var<float> l_gan = gan_loss_g(fake_out.scores);
  const Var<float> l_vgg = vgg_loss(target, fake, *vgg_);
  const Var<float> l_fm = fm_loss(real_features, fake_out.features);
  report.l_gan_g = l_gan.item();
  report.l_vgg = l_vgg.item();
  report.l_fm = l_fm.item();
  check_finite(report.l_gan_g, "l_gan_g", step_);
  check_finite(report.l_vgg, "l_vgg", step_);
  check_finite(report.l_fm, "l_fm", step_);
  const Var<float> total = total_g_loss(l_gan, l_vgg, l_fm, config_.weights);
  report.total_g = total.item();
  check_finite(report.total_g, "total_g", step_);
  g_opt_->zero_grad();
  backward(total);
  g_opt_->step();
  d_params_.set_requires_grad(true);
  d_opt_->zero_grad();

  ++step_;
  return report;
}

LossReport Trainer::train_next() {
  if (data_.size() == 0) throw EmptyInputError("trainer has no dataset");
  return train_step(make_batch(data_, schedule_.next(config_.batch_size), config_.model.qp_set));
}

TensorArchive Trainer::checkpoint() const {
  TensorArchive archive;
  archive.meta["kind"] = kCheckpointKind;
  archive.meta["version"] = kCheckpointVersion;
  archive.meta["step"] = step_;
  archive.meta["config"] = config_;
  archive.meta["model"] = config_.model;
  archive.meta["qp_set"] = config_.model.qp_set;
  if (data_.size() > 0) archive.meta["schedule"] = schedule_.state();
  auto g = g_params_;
  auto d = d_params_;
  store_parameters(g, archive, "generator.");
  store_parameters(d, archive, "discriminator.");
  g_opt_->store_state(archive, "optim.generator.");
  d_opt_->store_state(archive, "optim.discriminator.");
  return archive;
}

void Trainer::save(const std::filesystem::path& path) const { write_archive(path, checkpoint()); }

ModelConfig checkpoint_model_config(const TensorArchive& archive) {
  if (archive.meta.value("kind", "") != kCheckpointKind || archive.meta.value("version", 0) != kCheckpointVersion) {
    throw CheckpointError("not a version-1 checkpoint");
  }
  try {
    return archive.meta.at("model").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model config in checkpoint: ") + e.what());
  }
}

void Trainer::restore(const TensorArchive& archive) {
  if (checkpoint_model_config(archive) != config_.model) {
    throw CheckpointError("checkpoint model config differs from the training config");
  }
  load_parameters(g_params_, archive, "generator.");
  load_parameters(d_params_, archive, "discriminator.");
  g_opt_->load_state(archive, "optim.generator.");
  d_opt_->load_state(archive, "optim.discriminator.");
  step_ = archive.meta.at("step").get<std::int64_t>();
  if (data_.size() > 0) {
    if (!archive.meta.contains("schedule")) throw CheckpointError("checkpoint has no batch schedule state");
    schedule_.restore(archive.meta.at("schedule"));
  }
}

SampleSet load_training_data(const TrainingConfig& config) {
  if (config.dataset_dir.empty()) throw ConfigError("dataset_dir is not set");
  for (int q : config.qp_set) {
    if (!std::filesystem::exists(split_path(config.dataset_dir, q))) {
      throw ConfigError("missing dataset split for qp " + std::to_string(q) + ": " +
                        split_path(config.dataset_dir, q).string());
    }
  }
  SampleSet all;
  for (int q : config.qp_set) {
    SampleSet part = read_sample_cache(split_path(config.dataset_dir, q));
    for (int sample_qp : part.qp) {
      if (sample_qp != q) throw ConfigError("split for qp " + std::to_string(q) + " holds samples at qp " + std::to_string(sample_qp));
    }
    all.append(part);
  }
  if (all.size() == 0) throw ConfigError("dataset is empty");
  if (all.patch() != config.patch) {
    throw ConfigError("dataset patch " + std::to_string(all.patch()) + " differs from configured patch " +
                      std::to_string(config.patch));
  }
  return all;
}

std::string checkpoint_name(std::int64_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "step_%06lld.dcnc", static_cast<long long>(step));
  return buf;
}

std::filesystem::path train(const TrainingConfig& config, const TrainOptions& options) {
  config.validate();
  if (config.out_dir.empty()) throw ConfigError("out_dir is not set");
  SampleSet data = load_training_data(config);
  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path out(config.out_dir);

  Trainer trainer(config, std::move(data));
  std::vector<std::string> kept;
  if (options.resume) {
    trainer.load(*options.resume);
    std::ifstream old(out / kLossLogName);
    std::string line;
    while (std::getline(old, line)) {
      if (line.empty() || line[0] == '#' || line == kLossHeader) continue;
      if (std::stoll(line.substr(0, line.find(','))) < trainer.step()) kept.push_back(line);
    }
    spdlog::info("resumed at step {}", trainer.step());
  }
  std::ofstream log(out / kLossLogName, std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out / kLossLogName).string());
  log << kLossUnits << '\n' << kLossHeader << '\n';
  for (const auto& line : kept) log << line << '\n';
  log.flush();

  while (trainer.step() < config.steps) {
    const std::int64_t s = trainer.step();
    const LossReport report = trainer.train_next();
    log << format_row(s, report) << '\n';
    log.flush();
    if (options.on_step) options.on_step(s, report);
    if (config.checkpoint_every > 0 && trainer.step() % config.checkpoint_every == 0) {
      trainer.save(out / checkpoint_name(trainer.step()));
    }
  }
  const auto final_path = out / kFinalCheckpointName;
  trainer.save(final_path);
  return final_path;
}

std::unique_ptr<Generator<float>> load_generator(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path);
  const ModelConfig model = checkpoint_model_config(archive);
  auto generator = std::make_unique<Generator<float>>(model, 0);
  auto params = generator->parameters();
  load_parameters(params, archive, "generator.");
  return generator;
}

}  // namespace dcngan
