#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "dcngan/training.hpp"
#include "support.hpp"

using namespace dcngan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dcngan_train_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TrainingConfig tiny_config() {
  TrainingConfig c = TrainingConfig::desk();
  c.model.align_channels = 4;
  c.model.unet_base = 4;
  c.model.enc_base = 4;
  c.model.disc_base = 4;
  c.batch_size = 2;
  c.patch = 24;
  c.steps = 0;
  c.seed = 3;
  return c;
}

std::vector<TrainingSample> tiny_samples(int count, int qp = 37) {
  const auto raw = synthesize_video({32, 32, 4, 12, 1.5});
  std::vector<LumaFrame> deg;
  for (const auto& f : raw) deg.push_back(degrade(f, qp));
  PatchRequest req;
  req.patch = 24;
  req.count = count;
  req.seed = 5;
  req.qp = qp;
  return sample_patches(raw, deg, req);
}

void prepare(const fs::path& dir, const std::vector<int>& qps) {
  PrepareConfig p;
  p.qp_set = qps;
  p.patch = 24;
  p.patches_per_sequence = 3;
  p.seed = 8;
  prepare_dataset(synthetic_corpus(2, {32, 32, 3, 20, 1.5}), p, dir);
}

std::vector<Tensor<float>> snapshot(const nn::ParamList<float>& params) {
  std::vector<Tensor<float>> out;
  for (const auto& p : params.params) out.push_back(p.var.value());
  return out;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("full-scale optimizer and data settings are the defaults") {
    const TrainingConfig c;
    CHECK(c.adam.lr == 1e-4);
    CHECK(c.adam.beta1 == 0.9);
    CHECK(c.adam.beta2 == 0.999);
    CHECK(c.adam.eps == 1e-8);
    CHECK(c.batch_size == 32);
    CHECK(c.patch == 128);
    CHECK(c.qp_set == std::vector<int>{22, 27, 32, 37});
    CHECK(c.model.res_blocks == 9);
    CHECK(nn::kLeakySlope == 0.2);
    CHECK(c.weights.gan == 1.0);
    CHECK(c.weights.vgg == 1.0);
    CHECK(c.weights.fm == 1.0);

    const auto desk = TrainingConfig::desk();
    CHECK(desk.batch_size == 8);
    CHECK(desk.patch == 64);
    CHECK(desk.steps == 2000);
  }

  TEST_CASE("config validation and json") {
    auto c = tiny_config();
    c.qp_set = {30};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.patch = 16;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = tiny_config();
    c.checkpoint_every = 7;
    c.weights.fm = 0.5;
    nlohmann::json j = c;
    const auto back = j.get<TrainingConfig>();
    CHECK(back.model == c.model);
    CHECK(back.vgg == c.vgg);
    CHECK(back.checkpoint_every == 7);
    CHECK(back.weights.fm == 0.5);
    CHECK(back.patch == 24);
  }

  TEST_CASE("Adam matches the bias-corrected update by hand") {
    Var<double> w(Tensor<double>({2}, std::vector<double>{1.0, -2.0}), true);
    nn::ParamList<double> params;
    params.add("w", w);
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam<double> opt(params, cfg);
    double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
    for (int t = 1; t <= 3; ++t) {
      const double g[2] = {2 * x[0], 3.0};
      w.mutable_grad()[0] = g[0];
      w.mutable_grad()[1] = g[1];
      opt.step();
      for (int i = 0; i < 2; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
        x[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(w.value()[i] == doctest::Approx(x[i]).epsilon(1e-12));
      }
    }
    CHECK(opt.steps() == 3);
  }

  TEST_CASE("batch schedule") {
    BatchSchedule a(5, 1), b(5, 1);
    std::vector<int> seen;
    for (int i = 0; i < 5; ++i) {
      const auto x = a.next(1);
      CHECK(x == b.next(1));
      seen.push_back(x[0]);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<int>{0, 1, 2, 3, 4});
    const auto state = a.state();
    const auto next = a.next(3);
    BatchSchedule c(5, 99);
    c.restore(state);
    CHECK(c.next(3) == next);
  }

  TEST_CASE("seeded steps are reproducible") {
    const auto samples = tiny_samples(2);
    Trainer a(tiny_config()), b(tiny_config());
    for (int i = 0; i < 3; ++i) CHECK(a.train_step(samples) == b.train_step(samples));
    CHECK(a.step() == 3);
  }

  TEST_CASE("zero learning rate leaves parameters unchanged") {
    auto cfg = tiny_config();
    cfg.adam.lr = 0.0;
    Trainer t(cfg);
    const auto g0 = snapshot(t.generator().parameters());
    const auto d0 = snapshot(t.discriminator().parameters());
    t.train_step(tiny_samples(2));
    CHECK(snapshot(t.generator().parameters()) == g0);
    CHECK(snapshot(t.discriminator().parameters()) == d0);
  }

  TEST_CASE("discriminator update leaves the generator alone") {
    // With every generator term weighted 0 the generator gradient is zero,
    // so only the discriminator may move.
    auto cfg = tiny_config();
    cfg.weights = {0, 0, 0};
    Trainer t(cfg);
    const auto g0 = snapshot(t.generator().parameters());
    const auto d0 = snapshot(t.discriminator().parameters());
    t.train_step(tiny_samples(2));
    CHECK(snapshot(t.generator().parameters()) == g0);
    CHECK(snapshot(t.discriminator().parameters()) != d0);
  }

  TEST_CASE("generator update leaves the discriminator alone") {
    // Replay the discriminator half of a step on replica networks; the
    // trainer's discriminator must end up exactly there.
    const auto cfg = tiny_config();
    const auto batch = make_batch(tiny_samples(2));
    Generator<float> g(cfg.model, cfg.seed);
    Discriminator<float> d(cfg.model.disc_base, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Adam<float> opt(d.parameters(), cfg.adam);
    const auto fake = g.forward(Var<float>(batch.planes), Var<float>(batch.codes), nn::Mode::kTrain);
    const Var<float> target(batch.target);
    backward(gan_loss_d(d.discriminate(target), d.discriminate(fake.detach())));
    opt.step();

    Trainer t(cfg);
    t.train_step(batch);
    CHECK(snapshot(t.discriminator().parameters()) == snapshot(d.parameters()));
  }

  TEST_CASE("repeated steps on one sample lower the perceptual loss") {
    auto cfg = tiny_config();
    cfg.batch_size = 1;
    Trainer t(cfg);
    const auto one = tiny_samples(1);
    const double first = t.train_step(one).l_vgg;
    double last = first;
    for (int i = 1; i < 200; ++i) last = t.train_step(one).l_vgg;
    CHECK(last < first);
  }

  TEST_CASE("non-finite loss aborts with the step and term") {
    Trainer t(tiny_config());
    auto batch = make_batch(tiny_samples(2));
    t.train_step(batch);
    batch.target[5] = NAN;
    try {
      t.train_step(batch);
      FAIL("expected a divergence error");
    } catch (const TrainingDivergenceError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("step 1") != std::string::npos);
      CHECK(msg.find("l_gan_d") != std::string::npos);
    }
  }

  TEST_CASE("single-QP specialist keeps full-length codes") {
    TempDir dir("spec");
    prepare(dir.path, {37});
    auto cfg = tiny_config();
    cfg.qp_set = {37};
    cfg.dataset_dir = dir.path.string();
    const auto data = load_training_data(cfg);
    const auto batch = make_batch(data, {0}, cfg.model.qp_set);
    CHECK(batch.codes.storage() == std::vector<float>{0, 0, 0, 1});

    cfg.qp_set = {22, 37};
    CHECK_THROWS_AS(load_training_data(cfg), ConfigError);
  }

  TEST_CASE("zero-step run writes a checkpoint and an empty log") {
    TempDir dir("zero");
    prepare(dir.path / "data", {22, 27, 32, 37});
    auto cfg = tiny_config();
    cfg.dataset_dir = (dir.path / "data").string();
    cfg.out_dir = (dir.path / "out").string();
    const auto final_path = train(cfg);
    CHECK(final_path.filename() == kFinalCheckpointName);
    CHECK(fs::exists(final_path));
    std::ifstream log(dir.path / "out" / kLossLogName);
    std::vector<std::string> lines;
    for (std::string l; std::getline(log, l);) lines.push_back(l);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0][0] == '#');
    CHECK(lines[1] == "step,l_gan_g,l_gan_d,l_vgg,l_fm,total_g");
    CHECK(load_generator(final_path)->config() == cfg.model);
  }

  TEST_CASE("checkpoint round trip is bit-identical") {
    TempDir dir("ckpt");
    Trainer a(tiny_config());
    a.train_step(tiny_samples(2));
    a.save(dir.path / "a.dcnc");
    Trainer b(tiny_config());
    b.train_step(tiny_samples(2, 22));
    b.train_step(tiny_samples(2, 22));
    b.load(dir.path / "a.dcnc");
    CHECK(b.step() == 1);
    b.save(dir.path / "b.dcnc");
    CHECK(slurp(dir.path / "a.dcnc") == slurp(dir.path / "b.dcnc"));

    auto wider = tiny_config();
    wider.model.enc_base = 8;
    Trainer c(wider);
    CHECK_THROWS_AS(c.load(dir.path / "a.dcnc"), CheckpointError);
  }

  TEST_CASE("resume reproduces an uninterrupted run") {
    TempDir dir("resume");
    prepare(dir.path / "data", {22, 27, 32, 37});
    auto cfg = tiny_config();
    cfg.dataset_dir = (dir.path / "data").string();
    cfg.steps = 4;
    cfg.checkpoint_every = 2;
    cfg.out_dir = (dir.path / "full").string();
    train(cfg);
    cfg.out_dir = (dir.path / "again").string();
    train(cfg);
    CHECK(slurp(dir.path / "full" / kLossLogName) == slurp(dir.path / "again" / kLossLogName));

    // Interrupt after 2 steps: copy the partial state and continue from it.
    fs::create_directories(dir.path / "resumed");
    fs::copy_file(dir.path / "full" / checkpoint_name(2), dir.path / "resumed" / checkpoint_name(2));
    fs::copy_file(dir.path / "full" / kLossLogName, dir.path / "resumed" / kLossLogName);
    cfg.out_dir = (dir.path / "resumed").string();
    TrainOptions opts;
    opts.resume = dir.path / "resumed" / checkpoint_name(2);
    train(cfg, opts);
    CHECK(slurp(dir.path / "full" / kLossLogName) == slurp(dir.path / "resumed" / kLossLogName));
    // Same state; only the recorded output directory differs.
    auto full = read_archive(dir.path / "full" / kFinalCheckpointName);
    auto resumed = read_archive(dir.path / "resumed" / kFinalCheckpointName);
    CHECK(full.tensors == resumed.tensors);
    full.meta["config"].erase("out_dir");
    resumed.meta["config"].erase("out_dir");
    CHECK(full.meta == resumed.meta);
  }
}
