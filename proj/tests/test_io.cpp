#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "dcngan/archive.hpp"
#include "dcngan/batch.hpp"
#include "dcngan/dataset.hpp"
#include "dcngan/eval.hpp"
#include "dcngan/image_io.hpp"
#include "dcngan/metrics.hpp"
#include "support.hpp"

using namespace dcngan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dcngan_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ModelConfig tiny_model() {
  ModelConfig c = ModelConfig::desk();
  c.align_channels = 4;
  c.unet_base = 4;
  c.enc_base = 4;
  return c;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("tensor archive round trip and layout") {
    TempDir dir("archive");
    std::mt19937_64 rng(1);
    TensorArchive a;
    a.meta["kind"] = "test";
    a.meta["n"] = 3;
    a.add("w", testing::uniform<float>({2, 3}, rng));
    a.add("b", Tensor<float>({4}, -1.5f));
    write_archive(dir.path / "a.bin", a);
    const auto b = read_archive(dir.path / "a.bin");
    CHECK(b.meta == a.meta);
    CHECK(b.get("w") == a.get("w"));
    CHECK(b.get("b", {4}) == a.get("b"));
    CHECK_THROWS_AS(b.get("b", {5}), CheckpointError);
    CHECK_THROWS_AS(b.get("nope"), CheckpointError);

    const auto bytes = file_bytes(dir.path / "a.bin");
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == std::string("DCNGTNS\0", 8));
    CHECK(bytes[8] == 1);
    // The last float of the payload is b[3] = -1.5f, little-endian.
    float last;
    std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
    CHECK(last == -1.5f);
    CHECK(serialize_archive(b) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_archive(bad), CheckpointError);
    bad = bytes;
    bad.resize(bytes.size() - 2);
    CHECK_THROWS_AS(deserialize_archive(bad), CheckpointError);
    CHECK_THROWS_AS(read_archive(dir.path / "missing.bin"), IoError);
  }

  TEST_CASE("sample cache and splits") {
    TempDir dir("samples");
    const auto corpus = synthetic_corpus(2, {32, 32, 3, 10, 1.0});
    PrepareConfig cfg;
    cfg.qp_set = {22, 37};
    cfg.patch = 24;
    cfg.patches_per_sequence = 3;
    cfg.seed = 4;
    prepare_dataset(corpus, cfg, dir.path);
    const auto s22 = read_sample_cache(split_path(dir.path, 22));
    const auto s37 = read_sample_cache(split_path(dir.path, 37));
    CHECK(split_path(dir.path, 22).filename() == "qp22.dcns");
    CHECK(s22.size() == 6);
    CHECK(s22.patch() == 24);
    CHECK(s22.raw.shape() == Shape{6, 1, 24, 24});
    CHECK(s22.degraded.shape() == Shape{6, 3, 24, 24});
    // Same windows in every split: identical raw crops, different degradation.
    CHECK(s22.raw == s37.raw);
    CHECK(s22.degraded != s37.degraded);
    for (int q : s37.qp) CHECK(q == 37);
    CHECK(build_split(corpus, 22, cfg).raw == s22.raw);

    const auto sub = s22.select({4, 1});
    CHECK(sub.size() == 2);
    CHECK(sub.frame_index[0] == s22.frame_index[4]);
    auto joined = s22;
    joined.append(s37);
    CHECK(joined.size() == 12);

    const auto batch = make_batch(joined, {0, 7}, kDefaultQpSet);
    CHECK(batch.planes.shape() == Shape{2, 3, 24, 24});
    CHECK(batch.codes.storage() == std::vector<float>{1, 0, 0, 0, 0, 0, 0, 1});
    CHECK(batch.target.shape() == Shape{2, 1, 24, 24});
    CHECK_THROWS_AS(make_batch(joined, {0}, std::vector<int>{37}), UnsupportedQpError);

    std::ofstream(dir.path / "junk.dcns") << "not an archive";
    CHECK_THROWS_AS(read_sample_cache(dir.path / "junk.dcns"), CheckpointError);
  }

  TEST_CASE("png round trip") {
    TempDir dir("png");
    const auto frames = synthesize_video({16, 24, 3, 2, 1.0});
    write_frame_dir(dir.path / "seq", frames);
    CHECK(fs::exists(dir.path / "seq" / "000002.png"));
    const auto back = read_frame_dir(dir.path / "seq");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t p = 0; p < back[i].pixels().size(); ++p)
        CHECK(back[i].pixels()[p] == doctest::Approx(std::round(frames[i].pixels()[p] * 255) / 255.0).epsilon(1e-6));
    CHECK_THROWS_AS(read_frame_dir(dir.path / "nothing"), IoError);
    fs::create_directories(dir.path / "empty");
    CHECK_THROWS_AS(read_frame_dir(dir.path / "empty"), IoError);
    CHECK(read_sequence(dir.path / "seq").size() == 3);
  }

  TEST_CASE("raw video") {
    TempDir dir("raw");
    std::vector<std::uint8_t> bytes;
    for (int f = 0; f < 2; ++f) {
      for (int i = 0; i < 64; ++i) bytes.push_back(static_cast<std::uint8_t>(f * 100 + i));
      for (int i = 0; i < 32; ++i) bytes.push_back(128);
    }
    std::ofstream(dir.path / "v.yuv", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    const auto v = read_raw_video(dir.path / "v.yuv", PixelFormat::kYuv420p, 8, 8);
    REQUIRE(v.size() == 2);
    CHECK(v[1].at(0, 3) == doctest::Approx(103 / 255.0));
    CHECK(read_sequence(dir.path / "v.yuv", "yuv420p", 8, 8).size() == 2);
    CHECK_THROWS_AS(read_raw_video(dir.path / "v.yuv", PixelFormat::kYuv420p, 8, 9), MalformedInputError);
  }

  TEST_CASE("tiling") {
    const LumaFrame a(8, 8, 0.25f), b(8, 8, 0.75f);
    const auto t = tile_frames({a, b, a}, 2);
    CHECK(t.height() == 8 * 2 + 2);
    CHECK(t.width() == 8 * 2 + 2);
    CHECK(t.at(0, 10) == 0.75f);
    CHECK(t.at(0, 8) == 0.0f);
  }

  TEST_CASE("psnr and perceptual distance") {
    const LumaFrame a(16, 16, 0.5f), b(16, 16, 0.6f);
    CHECK(psnr(a, a) == kPsnrCapDb);
    CHECK(psnr(LumaFrame(16, 16, 0.0f), LumaFrame(16, 16, 1.0f)) == doctest::Approx(0.0));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));

    PerceptualMetric metric(VggConfig::desk());
    const auto seq = synthesize_video({32, 32, 2, 3, 1.0});
    CHECK(metric.distance(seq[0], seq[0]) == 0.0);
    const double d01 = metric.distance(seq[0], seq[1]);
    CHECK(d01 > 0.0);
    CHECK(metric.distance(seq[1], seq[0]) == doctest::Approx(d01).epsilon(1e-6));
    CHECK_FALSE(metric.calibrated());
  }

  TEST_CASE("calibrated distance") {
    TempDir dir("lpips");
    PerceptualMetric metric(VggConfig::desk());
    TensorArchive cal;
    const int widths[5] = {8, 16, 32, 64, 64};
    for (int i = 0; i < 5; ++i) cal.add("lin" + std::to_string(i) + ".weight", Tensor<float>({widths[i]}, 1.0f));
    write_archive(dir.path / "lin.dcnt", cal);
    metric.load_calibration(dir.path / "lin.dcnt");
    CHECK(metric.calibrated());
    const auto seq = synthesize_video({32, 32, 2, 3, 1.0});
    CHECK(metric.distance(seq[0], seq[0]) == 0.0);
    CHECK(metric.distance(seq[0], seq[1]) > 0.0);
    CHECK(metric.distance(seq[0], seq[1]) == doctest::Approx(metric.distance(seq[1], seq[0])).epsilon(1e-6));
  }

  TEST_CASE("enhance and evaluate") {
    TempDir dir("eval");
    Generator<float> g(tiny_model(), 3);
    const auto raw = synthesize_video({16, 16, 4, 8, 1.0});
    std::vector<LumaFrame> deg;
    for (const auto& f : raw) deg.push_back(degrade(f, 37));
    const auto out = enhance_sequence(g, deg, 37);
    CHECK(out.size() == 4);
    CHECK(enhance_sequence(g, deg, 37) == out);
    CHECK_THROWS_AS(enhance_sequence(g, deg, 30), UnsupportedQpError);

    PerceptualMetric metric(VggConfig::desk());
    MetricReport report = evaluate_sequence(deg, out, raw, metric);
    report.checkpoint = "none";
    report.backend = "dconv";
    report.qp = 37;
    REQUIRE(report.frames.size() == 4);
    CHECK(report.frames[2].psnr_degraded_db == doctest::Approx(psnr(deg[2], raw[2])));
    CHECK(report.mean().frame == -1);
    write_metric_csv(dir.path / "m.csv", report);
    const auto lines = read_lines(dir.path / "m.csv");
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] ==
          "checkpoint,backend,qp,frame,psnr_degraded_db,psnr_enhanced_db,distance_degraded_unitless,"
          "distance_enhanced_unitless");
    CHECK(lines[5].rfind("none,dconv,37,mean,", 0) == 0);

    QpStudyResult study = qp_adaptation_study({{"a", &g}}, {22, 37}, {raw}, metric);
    CHECK(study.distance.size() == 1);
    CHECK(study.at("a", 37) == doctest::Approx(mean_enhanced_distance(g, {raw}, 37, metric)));
    write_qp_study_csv(dir.path / "qp.csv", study);
    CHECK(read_lines(dir.path / "qp.csv")[0] == "model,distance_at_qp22_unitless,distance_at_qp37_unitless");
    write_qp_study_plot(dir.path / "qp.png", study);
    CHECK(fs::file_size(dir.path / "qp.png") > 0);
    CHECK_THROWS_AS(qp_adaptation_study(std::vector<std::pair<std::string, fs::path>>{{"x", dir.path / "none.dcnc"}},
                                        {37}, {raw}, metric),
                    ConfigError);
  }

  TEST_CASE("alignment benchmark rows") {
    TempDir dir("bench");
    auto flow_cfg = tiny_model();
    flow_cfg.align_backend = AlignBackend::kFlow;
    Generator<float> dconv(tiny_model(), 1), flow(flow_cfg, 1);
    AlignBenchRequest req;
    req.models = {{"dconv", &dconv}, {"flow", &flow}};
    const auto f = synthesize_video({32, 32, 3, 2, 1.0});
    const FrameTriplet t(f[0], f[1], f[2], 1);
    req.planes = stack_triplets<float>({&t});
    req.runs = 3;
    req.raw_sequences = {f};
    PerceptualMetric metric(VggConfig::desk());
    const auto rows = benchmark_alignment(req, metric);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].backend == "flow");
    CHECK(rows[0].median_ms_per_triplet > 0);
    CHECK(rows[0].height == 32);
    write_align_bench_csv(dir.path / "b.csv", rows);
    const auto lines = read_lines(dir.path / "b.csv");
    CHECK(lines.size() == 3);
    CHECK(lines[0] == "backend,batch_triplets,height_px,width_px,runs,median_latency_ms_per_triplet,distance_unitless");
    // Inference is deterministic, so the quality column reruns exactly.
    CHECK(benchmark_alignment(req, metric)[0].distance == rows[0].distance);
  }
}
