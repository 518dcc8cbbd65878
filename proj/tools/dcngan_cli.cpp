// Command-line front end: dataset preparation, training, enhancement,
// evaluation, the QP-adaptation study and the alignment benchmark.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dcngan/batch.hpp"
#include "dcngan/eval.hpp"
#include "dcngan/image_io.hpp"
#include "dcngan/training.hpp"

namespace fs = std::filesystem;
using namespace dcngan;

namespace {

// Flags every verb understands.
struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string align_backend;
  std::string vgg_weights;
};

void add_shared(CLI::App* app, Shared& s) {
  app->add_option("--config", s.config, "JSON configuration file");
  app->add_option("--seed", s.seed, "Random seed");
  app->add_option("--align-backend", s.align_backend, "Alignment backend: dconv or flow")
      ->check(CLI::IsMember({"dconv", "flow"}));
  app->add_option("--vgg-weights", s.vgg_weights, "VGG-19 weight archive (default: seeded random features)");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Optional JSON config shared by the evaluation verbs: {"vgg": {...}}.
VggConfig vgg_config(const Shared& s, const nlohmann::json& cfg) {
  VggConfig v = VggConfig::desk();
  if (cfg.contains("vgg")) {
    nlohmann::json j = v;
    j.update(cfg.at("vgg"));
    v = j.get<VggConfig>();
  }
  if (!s.vgg_weights.empty()) v.weights_path = s.vgg_weights;
  return v;
}

struct SequenceSource {
  std::vector<std::string> inputs;
  std::string format;
  int width = 0;
  int height = 0;
  int synthetic = 0;
  int synth_height = 160;
  int synth_width = 160;
  int synth_frames = 8;
  double synth_speed = 1.5;

  void add_to(CLI::App* app) {
    app->add_option("--input", inputs, "Frame directories or raw video files");
    app->add_option("--format", format, "Raw pixel format: yuv420p, rgb24 or gray8");
    app->add_option("--width", width, "Raw frame width");
    app->add_option("--height", height, "Raw frame height");
    app->add_option("--synthetic", synthetic, "Number of generated sequences to use instead of --input");
    app->add_option("--synthetic-height", synth_height, "Generated frame height");
    app->add_option("--synthetic-width", synth_width, "Generated frame width");
    app->add_option("--synthetic-frames", synth_frames, "Frames per generated sequence");
    app->add_option("--synthetic-speed", synth_speed, "Peak global motion of generated sequences (px/frame)");
  }

  std::vector<std::vector<LumaFrame>> load(std::uint64_t seed) const {
    if (synthetic > 0) {
      return synthetic_corpus(synthetic, {synth_height, synth_width, synth_frames, seed, synth_speed});
    }
    if (inputs.empty()) throw ConfigError("no input sequences (use --input or --synthetic)");
    std::vector<std::vector<LumaFrame>> out;
    for (const auto& in : inputs) out.push_back(read_sequence(in, format, width, height));
    return out;
  }
};

int run_prepare(const Shared& s, const SequenceSource& src, PrepareConfig prep, const std::string& out,
                const std::string& export_dir) {
  if (!s.config.empty()) {
    const auto cfg = read_json(s.config);
    prep.qp_set = cfg.value("qp_set", prep.qp_set);
    prep.patch = cfg.value("patch", prep.patch);
    prep.patches_per_sequence = cfg.value("patches_per_sequence", prep.patches_per_sequence);
    prep.seed = cfg.value("seed", prep.seed);
  }
  if (s.seed) prep.seed = *s.seed;
  const auto sequences = src.load(prep.seed);
  prepare_dataset(sequences, prep, out);
  for (int q : prep.qp_set) spdlog::info("wrote {}", split_path(out, q).string());
  if (!export_dir.empty()) {
    char name[32];
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      std::snprintf(name, sizeof name, "seq%03zu", i);
      write_frame_dir(fs::path(export_dir) / name, sequences[i]);
    }
    spdlog::info("exported {} raw sequences to {}", sequences.size(), export_dir);
  }
  return 0;
}

int run_train(const Shared& s, bool desk, std::optional<int> steps, const std::string& out, const std::string& data,
              const std::string& resume) {
  TrainingConfig config = desk ? TrainingConfig::desk() : TrainingConfig{};
  if (!s.config.empty()) {
    auto j = read_json(s.config);
    if (desk && !j.contains("preset")) j["preset"] = "desk";
    config = j.get<TrainingConfig>();
  }
  if (s.seed) config.seed = *s.seed;
  if (!s.align_backend.empty()) config.model.align_backend = parse_align_backend(s.align_backend);
  if (!s.vgg_weights.empty()) config.vgg.weights_path = s.vgg_weights;
  if (steps) config.steps = *steps;
  if (!out.empty()) config.out_dir = out;
  if (!data.empty()) config.dataset_dir = data;
  config.validate();

  TrainOptions options;
  if (!resume.empty()) options.resume = resume;
  options.on_step = [&](std::int64_t step, const LossReport& r) {
    if (step % 50 == 0 || step + 1 == config.steps) {
      spdlog::info("step {:>6}  l_gan_d {:.4f}  l_gan_g {:.4f}  l_vgg {:.4f}  l_fm {:.4f}  total_g {:.4f}", step,
                   r.l_gan_d, r.l_gan_g, r.l_vgg, r.l_fm, r.total_g);
    }
  };
  std::ofstream(fs::path(config.out_dir) / "config.json") << nlohmann::json(config).dump(2) << '\n';
  const fs::path final_path = train(config, options);
  spdlog::info("final checkpoint {}", final_path.string());
  return 0;
}

std::unique_ptr<Generator<float>> open_checkpoint(const std::string& path, const Shared& s) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path);
  auto gen = load_generator(path);
  if (!s.align_backend.empty() && parse_align_backend(s.align_backend) != gen->config().align_backend) {
    throw ConfigError("checkpoint uses the " + to_string(gen->config().align_backend) + " backend, not " +
                      s.align_backend);
  }
  return gen;
}

PerceptualMetric make_metric(const Shared& s, const std::string& lpips) {
  const nlohmann::json cfg = s.config.empty() ? nlohmann::json::object() : read_json(s.config);
  PerceptualMetric metric(vgg_config(s, cfg));
  if (!lpips.empty()) metric.load_calibration(lpips);
  return metric;
}

int run_enhance(const Shared& s, const SequenceSource& src, int qp, const std::string& checkpoint,
                const std::string& out, const std::string& reference, const std::string& metrics_csv,
                const std::string& panel, const std::string& lpips) {
  auto gen = open_checkpoint(checkpoint, s);
  if (src.inputs.size() != 1) throw ConfigError("enhance takes exactly one --input sequence");
  const auto degraded = read_sequence(src.inputs[0], src.format, src.width, src.height);
  const auto enhanced = enhance_sequence(*gen, degraded, qp);
  write_frame_dir(out, enhanced);
  spdlog::info("wrote {} frames to {}", enhanced.size(), out);

  std::vector<LumaFrame> ref;
  if (!reference.empty()) ref = read_sequence(reference, src.format, src.width, src.height);
  if (!ref.empty()) {
    const auto metric = make_metric(s, lpips);
    MetricReport report = evaluate_sequence(degraded, enhanced, ref, metric);
    report.checkpoint = fs::path(checkpoint).filename().string();
    report.backend = to_string(gen->config().align_backend);
    report.qp = qp;
    const fs::path csv = metrics_csv.empty() ? fs::path(out) / "metrics.csv" : fs::path(metrics_csv);
    write_metric_csv(csv, report);
    const auto m = report.mean();
    spdlog::info("mean PSNR {:.2f} -> {:.2f} dB, distance {:.4f} -> {:.4f}", m.psnr_degraded_db, m.psnr_enhanced_db,
                 m.distance_degraded, m.distance_enhanced);
  }
  if (!panel.empty()) {
    // One row per frame: degraded | enhanced [| reference].
    std::vector<LumaFrame> tiles;
    const int cols = ref.empty() ? 2 : 3;
    for (std::size_t i = 0; i < degraded.size(); ++i) {
      tiles.push_back(degraded[i]);
      tiles.push_back(enhanced[i]);
      if (!ref.empty()) tiles.push_back(ref[i]);
    }
    write_png_gray(panel, tile_frames(tiles, cols));
  }
  return 0;
}

int run_evaluate(const Shared& s, const SequenceSource& src, int qp, const std::string& checkpoint,
                 const std::string& out, const std::string& lpips) {
  auto gen = open_checkpoint(checkpoint, s);
  const auto metric = make_metric(s, lpips);
  const auto sequences = src.load(s.seed.value_or(0));
  fs::create_directories(out);
  std::ofstream summary(fs::path(out) / "summary.csv");
  summary << "sequence,qp,frames,psnr_degraded_db,psnr_enhanced_db,distance_degraded_unitless,"
             "distance_enhanced_unitless\n";
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    std::vector<LumaFrame> degraded;
    for (const auto& f : sequences[i]) degraded.push_back(degrade(f, qp));
    const auto enhanced = enhance_sequence(*gen, degraded, qp);
    MetricReport report = evaluate_sequence(degraded, enhanced, sequences[i], metric);
    report.checkpoint = fs::path(checkpoint).filename().string();
    report.backend = to_string(gen->config().align_backend);
    report.qp = qp;
    write_metric_csv(fs::path(out) / ("seq" + std::to_string(i) + ".csv"), report);
    const auto m = report.mean();
    char row[256];
    std::snprintf(row, sizeof row, "%zu,%d,%zu,%.6f,%.6f,%.6f,%.6f", i, qp, sequences[i].size(), m.psnr_degraded_db,
                  m.psnr_enhanced_db, m.distance_degraded, m.distance_enhanced);
    summary << row << '\n';
    spdlog::info("sequence {}: PSNR {:.2f} -> {:.2f} dB, distance {:.4f} -> {:.4f}", i, m.psnr_degraded_db,
                 m.psnr_enhanced_db, m.distance_degraded, m.distance_enhanced);
  }
  return 0;
}

int run_qp_study(const Shared& s, const SequenceSource& src, std::vector<std::string> checkpoint_args,
                 std::vector<int> test_qps, const std::string& out, const std::string& lpips) {
  // --checkpoint name=path, or {"checkpoints": {"name": "path"}, "test_qps": [...]} in --config.
  std::vector<std::pair<std::string, fs::path>> checkpoints;
  if (!s.config.empty()) {
    const auto cfg = read_json(s.config);
    if (cfg.contains("checkpoints")) {
      for (const auto& item : cfg.at("checkpoints")) {
        checkpoints.emplace_back(item.at("name").get<std::string>(), item.at("path").get<std::string>());
      }
    }
    if (test_qps.empty()) test_qps = cfg.value("test_qps", std::vector<int>{});
  }
  for (const auto& arg : checkpoint_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) throw ConfigError("--checkpoint expects name=path, got " + arg);
    checkpoints.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
  }
  if (checkpoints.empty()) throw ConfigError("no checkpoints given");
  if (test_qps.empty()) test_qps = kDefaultQpSet;
  const auto metric = make_metric(s, lpips);
  const auto result = qp_adaptation_study(checkpoints, test_qps, src.load(s.seed.value_or(1000)), metric);
  write_qp_study_csv(fs::path(out) / "qp_study.csv", result);
  write_qp_study_plot(fs::path(out) / "qp_study.png", result);
  for (std::size_t m = 0; m < result.models.size(); ++m) {
    std::string line = result.models[m];
    for (double d : result.distance[m]) line += "  " + std::to_string(d);
    spdlog::info("{}", line);
  }
  return 0;
}

int run_bench(const Shared& s, const SequenceSource& src, const std::string& dconv_ckpt, const std::string& flow_ckpt,
              int runs, int size, int batch, int qp, const std::string& out, const std::string& lpips) {
  std::vector<std::unique_ptr<Generator<float>>> owned;
  std::vector<NamedGenerator> models;
  const std::pair<AlignBackend, std::string> backends[] = {{AlignBackend::kDeformable, dconv_ckpt},
                                                           {AlignBackend::kFlow, flow_ckpt}};
  for (const auto& [backend, path] : backends) {
    if (path.empty()) {
      // Untrained model of the desk architecture: latency only is meaningful.
      ModelConfig m = ModelConfig::desk();
      m.align_backend = backend;
      owned.push_back(std::make_unique<Generator<float>>(m, s.seed.value_or(0)));
      spdlog::warn("no {} checkpoint: timing an untrained desk model", to_string(backend));
    } else {
      owned.push_back(load_generator(path));
      if (owned.back()->config().align_backend != backend) throw ConfigError(path + " is not a " + to_string(backend) + " checkpoint");
    }
    models.push_back({to_string(backend), owned.back().get()});
  }
  const auto raw = synthesize_video({size, size, 3, s.seed.value_or(0) + 77, 1.5});
  const auto triplet = make_triplets(raw)[1];
  std::vector<const FrameTriplet*> ptrs(static_cast<std::size_t>(batch), &triplet);

  AlignBenchRequest req;
  req.models = models;
  req.planes = stack_triplets<float>(ptrs);
  req.runs = runs;
  req.quality_qp = qp;
  if (src.synthetic > 0 || !src.inputs.empty()) req.raw_sequences = src.load(s.seed.value_or(1000));
  const auto metric = make_metric(s, lpips);
  const auto rows = benchmark_alignment(req, metric);
  write_align_bench_csv(fs::path(out) / "align_bench.csv", rows);
  write_align_bench_plot(fs::path(out) / "align_bench.png", rows);
  for (const auto& r : rows) {
    spdlog::info("{:>5}: {:.3f} ms / triplet (median of {}, {}x{}, batch {}), distance {:.4f}", r.backend,
                 r.median_ms_per_triplet, r.runs, r.height, r.width, r.batch, r.distance);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-video enhancement with deformable alignment and QP-conditioned GAN training"};
  app.require_subcommand(1);

  Shared shared;
  SequenceSource source;

  auto* prepare = app.add_subcommand("prepare-data", "Degrade sequences and write per-QP patch caches");
  add_shared(prepare, shared);
  source.add_to(prepare);
  PrepareConfig prep;
  std::string out, export_dir;
  prepare->add_option("--out", out, "Output dataset directory")->required();
  prepare->add_option("--qp-set", prep.qp_set, "QPs to prepare");
  prepare->add_option("--patch", prep.patch, "Patch side in pixels");
  prepare->add_option("--patches-per-sequence", prep.patches_per_sequence, "Patches cropped per sequence");
  prepare->add_option("--export-frames", export_dir, "Also write the raw sequences as PNG directories");

  auto* train_cmd = app.add_subcommand("train", "Train generator and discriminator");
  add_shared(train_cmd, shared);
  bool desk = false;
  std::optional<int> steps;
  std::string data, resume;
  train_cmd->add_flag("--desk", desk, "Start from the CPU-sized preset");
  train_cmd->add_option("--steps", steps, "Override the number of steps");
  train_cmd->add_option("--out", out, "Output directory (checkpoints, losses.csv)");
  train_cmd->add_option("--data", data, "Dataset directory from prepare-data");
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from");

  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a compressed sequence");
  add_shared(enhance_cmd, shared);
  source.add_to(enhance_cmd);
  int qp = 37;
  std::string checkpoint, reference, metrics_csv, panel, lpips;
  enhance_cmd->add_option("--qp", qp, "QP the input was compressed at")->required();
  enhance_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  enhance_cmd->add_option("--out", out, "Output frame directory")->required();
  enhance_cmd->add_option("--reference", reference, "Uncompressed reference for metrics");
  enhance_cmd->add_option("--metrics", metrics_csv, "Metrics CSV path (default <out>/metrics.csv)");
  enhance_cmd->add_option("--panel", panel, "Write a degraded|enhanced|reference PNG grid");
  enhance_cmd->add_option("--lpips-weights", lpips, "Per-channel calibration weights for the distance");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Degrade, enhance and score reference sequences");
  add_shared(evaluate_cmd, shared);
  source.add_to(evaluate_cmd);
  evaluate_cmd->add_option("--qp", qp, "Test QP")->required();
  evaluate_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  evaluate_cmd->add_option("--out", out, "Output directory for CSVs")->required();
  evaluate_cmd->add_option("--lpips-weights", lpips, "Per-channel calibration weights for the distance");

  auto* study = app.add_subcommand("qp-study", "Evaluate every checkpoint at every test QP");
  add_shared(study, shared);
  source.add_to(study);
  std::vector<std::string> checkpoint_args;
  std::vector<int> test_qps;
  study->add_option("--checkpoint", checkpoint_args, "name=path (repeatable)");
  study->add_option("--test-qps", test_qps, "Test QPs (default 22 27 32 37)");
  study->add_option("--out", out, "Output directory")->required();
  study->add_option("--lpips-weights", lpips, "Per-channel calibration weights for the distance");

  auto* bench = app.add_subcommand("bench-align", "Time deformable vs optical-flow alignment");
  add_shared(bench, shared);
  source.add_to(bench);
  std::string dconv_ckpt, flow_ckpt;
  int runs = 100, size = 128, batch = 1;
  bench->add_option("--dconv-checkpoint", dconv_ckpt, "Checkpoint with deformable alignment");
  bench->add_option("--flow-checkpoint", flow_ckpt, "Checkpoint with optical-flow alignment");
  bench->add_option("--runs", runs, "Timed runs per backend")->check(CLI::Range(1, 100000));
  bench->add_option("--size", size, "Square frame side")->check(CLI::Range(24, 4096));
  bench->add_option("--batch", batch, "Triplets per timed call")->check(CLI::Range(1, 256));
  bench->add_option("--qp", qp, "QP for the quality column");
  bench->add_option("--out", out, "Output directory")->required();
  bench->add_option("--lpips-weights", lpips, "Per-channel calibration weights for the distance");

  CLI11_PARSE(app, argc, argv);
  try {
    if (prepare->parsed()) return run_prepare(shared, source, prep, out, export_dir);
    if (train_cmd->parsed()) return run_train(shared, desk, steps, out, data, resume);
    if (enhance_cmd->parsed()) {
      return run_enhance(shared, source, qp, checkpoint, out, reference, metrics_csv, panel, lpips);
    }
    if (evaluate_cmd->parsed()) return run_evaluate(shared, source, qp, checkpoint, out, lpips);
    if (study->parsed()) return run_qp_study(shared, source, checkpoint_args, test_qps, out, lpips);
    if (bench->parsed()) return run_bench(shared, source, dconv_ckpt, flow_ckpt, runs, size, batch, qp, out, lpips);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 3;
  }
  return 0;
}
