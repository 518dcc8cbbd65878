#include <doctest.h>

#include <cmath>
#include <random>

#include "dcngan/batch.hpp"
#include "dcngan/flow.hpp"
#include "support.hpp"

using namespace dcngan;

namespace {

LumaFrame circular_shift(const LumaFrame& f, int sy, int sx) {
  LumaFrame out(f.height(), f.width());
  const int h = f.height(), w = f.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = f.at(((y + sy) % h + h) % h, ((x + sx) % w + w) % w);
  return out;
}

double interior_mean(const std::vector<float>& v, int h, int w, int margin) {
  double s = 0;
  int n = 0;
  for (int y = margin; y < h - margin; ++y)
    for (int x = margin; x < w - margin; ++x) s += v[static_cast<std::size_t>(y) * w + x], ++n;
  return s / n;
}

double interior_mae(const LumaFrame& a, const LumaFrame& b, int margin) {
  double s = 0;
  int n = 0;
  for (int y = margin; y < a.height() - margin; ++y)
    for (int x = margin; x < a.width() - margin; ++x) s += std::abs(a.at(y, x) - b.at(y, x)), ++n;
  return s / n;
}

}  // namespace

TEST_SUITE("flow_baseline") {
  TEST_CASE("no motion gives zero flow") {
    const auto f = synthesize_video({48, 48, 1, 3, 1.0}).front();
    const auto flow = estimate_flow(f, f);
    for (std::size_t i = 0; i < flow.dy.size(); ++i) {
      CHECK(std::abs(flow.dy[i]) < 1e-3);
      CHECK(std::abs(flow.dx[i]) < 1e-3);
    }
  }

  TEST_CASE("recovers a two-pixel shift") {
    const auto src = synthesize_video({64, 64, 1, 4, 1.0}).front();
    // dst(p) = src(p + (2, 0)), so the flow towards src is (2, 0).
    const auto dst = circular_shift(src, 2, 0);
    const auto flow = estimate_flow(src, dst);
    const double dy = interior_mean(flow.dy, 64, 64, 12), dx = interior_mean(flow.dx, 64, 64, 12);
    CHECK(std::abs(dy - 2.0) < 0.5);
    CHECK(std::abs(dx) < 0.5);

    const auto side = estimate_flow(src, circular_shift(src, 0, -2));
    CHECK(std::abs(interior_mean(side.dx, 64, 64, 12) + 2.0) < 0.5);
  }

  TEST_CASE("warp") {
    const auto f = synthesize_video({16, 20, 1, 5, 1.0}).front();
    CHECK(warp(f, FlowField(16, 20)) == f);

    FlowField down(16, 20);
    std::fill(down.dy.begin(), down.dy.end(), 1.0f);
    const auto shifted = warp(f, down);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 20; ++x) CHECK(shifted.at(y, x) == doctest::Approx(y + 1 < 16 ? f.at(y + 1, x) : 0.0f));
    CHECK_THROWS_AS(warp(f, FlowField(16, 21)), ShapeError);
  }

  TEST_CASE("round trip on smooth motion") {
    const auto seq = synthesize_video({64, 64, 2, 6, 1.5});
    const auto flow = estimate_flow(seq[0], seq[1]);
    CHECK(interior_mae(warp(seq[0], flow), seq[1], 8) < 0.02);
  }

  TEST_CASE("size mismatch") {
    CHECK_THROWS_AS(estimate_flow(LumaFrame(16, 16), LumaFrame(16, 24)), ShapeError);
  }

  TEST_CASE("flow aligner") {
    nn::Rng rng(1);
    FlowAligner<float> aligner(5, 3, 3, rng);
    CHECK(aligner.channels() == 5);
    const auto f = synthesize_video({32, 32, 1, 7, 1.0}).front();
    const FrameTriplet still(f, f, f, 0);
    const auto planes = stack_triplets<float>({&still});
    const auto stack = aligner.aligned_stack(planes);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) CHECK(stack.at(0, c, y, x) == doctest::Approx(f.at(y, x)).epsilon(1e-4));

    const auto out = aligner.align(Var<float>(planes), nn::Mode::kEval);
    CHECK(out.shape() == Shape{1, 5, 32, 32});
    CHECK_THROWS_AS(aligner.aligned_stack(Tensor<float>({1, 2, 32, 32})), ShapeError);
  }
}
