#include "dcngan/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "dcngan/batch.hpp"
#include "dcngan/plot.hpp"
#include "dcngan/training.hpp"

namespace dcngan {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<LumaFrame> enhance_sequence(Generator<float>& generator, const std::vector<LumaFrame>& degraded, int qp) {
  if (degraded.empty()) throw EmptyInputError("no frames to enhance");
  encode_qp(qp, generator.config().qp_set);
  std::vector<LumaFrame> out;
  out.reserve(degraded.size());
  for (const auto& triplet : make_triplets(degraded)) out.push_back(generate(generator, triplet, qp));
  return out;
}

FrameMetrics MetricReport::mean() const {
  FrameMetrics m;
  m.frame = -1;
  if (frames.empty()) return m;
  for (const auto& f : frames) {
    m.psnr_degraded_db += f.psnr_degraded_db;
    m.psnr_enhanced_db += f.psnr_enhanced_db;
    m.distance_degraded += f.distance_degraded;
    m.distance_enhanced += f.distance_enhanced;
  }
  const double n = static_cast<double>(frames.size());
  m.psnr_degraded_db /= n;
  m.psnr_enhanced_db /= n;
  m.distance_degraded /= n;
  m.distance_enhanced /= n;
  return m;
}

MetricReport evaluate_sequence(const std::vector<LumaFrame>& degraded, const std::vector<LumaFrame>& enhanced,
                               const std::vector<LumaFrame>& reference, const PerceptualMetric& metric) {
  if (degraded.size() != reference.size() || enhanced.size() != reference.size()) {
    throw ShapeError("evaluate: sequences differ in frame count");
  }
  MetricReport report;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    report.frames.push_back({static_cast<int>(i), psnr(degraded[i], reference[i]), psnr(enhanced[i], reference[i]),
                             metric.distance(degraded[i], reference[i]), metric.distance(enhanced[i], reference[i])});
  }
  return report;
}

void write_metric_csv(const std::filesystem::path& path, const MetricReport& report) {
  auto out = open_csv(path);
  out << "checkpoint,backend,qp,frame,psnr_degraded_db,psnr_enhanced_db,distance_degraded_unitless,"
         "distance_enhanced_unitless\n";
  auto row = [&](const std::string& frame, const FrameMetrics& m) {
    out << report.checkpoint << ',' << report.backend << ',' << report.qp << ',' << frame << ','
        << num(m.psnr_degraded_db) << ',' << num(m.psnr_enhanced_db) << ',' << num(m.distance_degraded) << ','
        << num(m.distance_enhanced) << '\n';
  };
  for (const auto& f : report.frames) row(std::to_string(f.frame), f);
  row("mean", report.mean());
}

double mean_enhanced_distance(Generator<float>& generator, const std::vector<std::vector<LumaFrame>>& raw_sequences,
                              int qp, const PerceptualMetric& metric) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& raw : raw_sequences) {
    std::vector<LumaFrame> degraded;
    for (const auto& f : raw) degraded.push_back(degrade(f, qp));
    const auto enhanced = enhance_sequence(generator, degraded, qp);
    for (std::size_t i = 0; i < raw.size(); ++i) sum += metric.distance(enhanced[i], raw[i]);
    count += raw.size();
  }
  if (count == 0) throw EmptyInputError("no evaluation frames");
  return sum / static_cast<double>(count);
}

double QpStudyResult::at(const std::string& model, int qp) const {
  const auto m = std::find(models.begin(), models.end(), model);
  const auto q = std::find(test_qps.begin(), test_qps.end(), qp);
  if (m == models.end() || q == test_qps.end()) throw ConfigError("no study entry for " + model + " at qp " + std::to_string(qp));
  return distance[static_cast<std::size_t>(m - models.begin())][static_cast<std::size_t>(q - test_qps.begin())];
}

QpStudyResult qp_adaptation_study(const std::vector<NamedGenerator>& models, const std::vector<int>& test_qps,
                                  const std::vector<std::vector<LumaFrame>>& raw_sequences,
                                  const PerceptualMetric& metric) {
  QpStudyResult result;
  result.test_qps = test_qps;
  for (const auto& m : models) {
    result.models.push_back(m.name);
    std::vector<double> row;
    for (int q : test_qps) row.push_back(mean_enhanced_distance(*m.generator, raw_sequences, q, metric));
    result.distance.push_back(std::move(row));
  }
  return result;
}

QpStudyResult qp_adaptation_study(const std::vector<std::pair<std::string, std::filesystem::path>>& checkpoints,
                                  const std::vector<int>& test_qps,
                                  const std::vector<std::vector<LumaFrame>>& raw_sequences,
                                  const PerceptualMetric& metric) {
  for (const auto& [name, path] : checkpoints) {
    if (!std::filesystem::exists(path)) throw ConfigError("missing checkpoint for " + name + ": " + path.string());
  }
  std::vector<std::unique_ptr<Generator<float>>> owned;
  std::vector<NamedGenerator> models;
  for (const auto& [name, path] : checkpoints) {
    owned.push_back(load_generator(path));
    models.push_back({name, owned.back().get()});
  }
  return qp_adaptation_study(models, test_qps, raw_sequences, metric);
}

void write_qp_study_csv(const std::filesystem::path& path, const QpStudyResult& result) {
  auto out = open_csv(path);
  out << "model";
  for (int q : result.test_qps) out << ",distance_at_qp" << q << "_unitless";
  out << '\n';
  for (std::size_t m = 0; m < result.models.size(); ++m) {
    out << result.models[m];
    for (double d : result.distance[m]) out << ',' << num(d);
    out << '\n';
  }
}

void write_qp_study_plot(const std::filesystem::path& path, const QpStudyResult& result) {
  std::vector<std::string> groups;
  for (int q : result.test_qps) groups.push_back("QP " + std::to_string(q));
  write_bar_plot(path, "Perceptual distance by training / test QP (lower is better)", groups, result.models,
                 result.distance, "distance");
}

double median_align_latency_ms(Generator<float>& generator, const Tensor<float>& planes, int runs, int warmup) {
  if (runs < 1) throw ConfigError("benchmark needs at least one run");
  NoGradGuard no_grad;
  const Var<float> input(planes);
  for (int i = 0; i < warmup; ++i) generator.align(input, nn::Mode::kEval);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Var<float> z = generator.align(input, nn::Mode::kEval);
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

std::vector<AlignBenchRow> benchmark_alignment(const AlignBenchRequest& request, const PerceptualMetric& metric) {
  if (request.planes.rank() != 4 || request.planes.dim(1) != 3) {
    throw ShapeError("benchmark input must be [N, 3, H, W], got " + shape_str(request.planes.shape()));
  }
  const int n = request.planes.dim(0);
  std::vector<AlignBenchRow> rows;
  for (const auto& m : request.models) {
    AlignBenchRow row;
    row.backend = m.name;
    row.batch = n;
    row.height = request.planes.dim(2);
    row.width = request.planes.dim(3);
    row.runs = request.runs;
    row.median_ms_per_triplet = median_align_latency_ms(*m.generator, request.planes, request.runs) / n;
    if (!request.raw_sequences.empty()) {
      row.distance = mean_enhanced_distance(*m.generator, request.raw_sequences, request.quality_qp, metric);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_align_bench_csv(const std::filesystem::path& path, const std::vector<AlignBenchRow>& rows) {
  auto out = open_csv(path);
  out << "backend,batch_triplets,height_px,width_px,runs,median_latency_ms_per_triplet,distance_unitless\n";
  for (const auto& r : rows) {
    out << r.backend << ',' << r.batch << ',' << r.height << ',' << r.width << ',' << r.runs << ','
        << num(r.median_ms_per_triplet) << ',' << num(r.distance) << '\n';
  }
}

void write_align_bench_plot(const std::filesystem::path& path, const std::vector<AlignBenchRow>& rows) {
  std::vector<ScatterPoint> points;
  for (const auto& r : rows) points.push_back({r.backend, r.median_ms_per_triplet, r.distance});
  write_scatter_plot(path, "Alignment: perceptual distance vs runtime", points, "latency (ms / triplet)", "distance");
}

}  // namespace dcngan
