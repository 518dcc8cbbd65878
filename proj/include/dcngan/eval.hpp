#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dcngan/generator.hpp"
#include "dcngan/metrics.hpp"

namespace dcngan {

// Enhances every frame of a degraded sequence (edges replicated into the
// triplets). Throws UnsupportedQpError if qp is outside the model's QP set.
std::vector<LumaFrame> enhance_sequence(Generator<float>& generator, const std::vector<LumaFrame>& degraded, int qp);

struct FrameMetrics {
  int frame = 0;
  double psnr_degraded_db = 0;
  double psnr_enhanced_db = 0;
  double distance_degraded = 0;
  double distance_enhanced = 0;
};

struct MetricReport {
  std::string checkpoint;
  std::string backend;
  int qp = 0;
  std::vector<FrameMetrics> frames;

  FrameMetrics mean() const;  // frame = -1
};

MetricReport evaluate_sequence(const std::vector<LumaFrame>& degraded, const std::vector<LumaFrame>& enhanced,
                               const std::vector<LumaFrame>& reference, const PerceptualMetric& metric);
// Per-frame rows followed by a "mean" row.
void write_metric_csv(const std::filesystem::path& path, const MetricReport& report);

// Mean perceptual distance between enhanced and raw frames when every raw
// sequence is degraded at qp and passed through the generator.
double mean_enhanced_distance(Generator<float>& generator, const std::vector<std::vector<LumaFrame>>& raw_sequences,
                              int qp, const PerceptualMetric& metric);

struct QpStudyResult {
  std::vector<std::string> models;
  std::vector<int> test_qps;
  std::vector<std::vector<double>> distance;  // [model][test qp]

  double at(const std::string& model, int qp) const;
};

struct NamedGenerator {
  std::string name;
  Generator<float>* generator;
};

QpStudyResult qp_adaptation_study(const std::vector<NamedGenerator>& models, const std::vector<int>& test_qps,
                                  const std::vector<std::vector<LumaFrame>>& raw_sequences,
                                  const PerceptualMetric& metric);
// Loads each checkpoint; ConfigError if one is missing.
QpStudyResult qp_adaptation_study(const std::vector<std::pair<std::string, std::filesystem::path>>& checkpoints,
                                  const std::vector<int>& test_qps,
                                  const std::vector<std::vector<LumaFrame>>& raw_sequences,
                                  const PerceptualMetric& metric);
void write_qp_study_csv(const std::filesystem::path& path, const QpStudyResult& result);
void write_qp_study_plot(const std::filesystem::path& path, const QpStudyResult& result);

// Warm median wall-clock of generator.align on `planes` [N, 3, H, W], in
// inference mode, in milliseconds.
double median_align_latency_ms(Generator<float>& generator, const Tensor<float>& planes, int runs, int warmup = 5);

struct AlignBenchRow {
  std::string backend;
  int batch = 1;
  int height = 0;
  int width = 0;
  int runs = 0;
  double median_ms_per_triplet = 0;
  double distance = 0;  // mean enhanced-vs-raw perceptual distance
};

struct AlignBenchRequest {
  std::vector<NamedGenerator> models;  // one per backend
  Tensor<float> planes;                // timing input
  int runs = 100;
  int quality_qp = 37;
  std::vector<std::vector<LumaFrame>> raw_sequences;  // quality input; may be empty
};

std::vector<AlignBenchRow> benchmark_alignment(const AlignBenchRequest& request, const PerceptualMetric& metric);
void write_align_bench_csv(const std::filesystem::path& path, const std::vector<AlignBenchRow>& rows);
void write_align_bench_plot(const std::filesystem::path& path, const std::vector<AlignBenchRow>& rows);

}  // namespace dcngan
