#include <doctest.h>

#include <random>

#include "dcngan/discriminator.hpp"
#include "support.hpp"

using namespace dcngan;
using testing::uniform;

namespace {

// k4 / pad 1 convolutions with strides 2, 2, 2, 1 and a stride-1 head.
int expected_grid(int side) {
  for (int stride : {2, 2, 2, 1, 1}) {
    if (side + 2 < 4) return 0;
    side = (side + 2 - 4) / stride + 1;
  }
  return side;
}

}  // namespace

TEST_SUITE("discriminator") {
  TEST_CASE("score grid size") {
    CHECK(Discriminator<float>::score_size(64) == 6);
    CHECK(Discriminator<float>::score_size(128) == 14);
    for (int s = 1; s < 200; ++s) CHECK(Discriminator<float>::score_size(s) == expected_grid(s));
    int smallest = 1;
    while (expected_grid(smallest) < 1) ++smallest;
    CHECK(Discriminator<float>::min_input_size() == smallest);
    CHECK(smallest == 24);

    Discriminator<float> d(4, 1);
    std::mt19937_64 rng(2);
    const auto out = d.forward(Var<float>(uniform<float>({2, 1, 64, 40}, rng, 0, 1)));
    CHECK(out.scores.scores.shape() == Shape{2, 1, 6, expected_grid(40)});
    CHECK(d.forward(Var<float>(uniform<float>({1, 1, 128, 128}, rng, 0, 1))).scores.scores.shape() == Shape{1, 1, 14, 14});
  }

  TEST_CASE("too small or wrongly shaped input") {
    Discriminator<float> d(4, 1);
    CHECK_THROWS_AS(d.forward(Var<float>(Tensor<float>({1, 1, 23, 64}))), InputTooSmallError);
    CHECK_NOTHROW(d.forward(Var<float>(Tensor<float>({1, 1, 24, 24}))));
    CHECK_THROWS_AS(d.forward(Var<float>(Tensor<float>({1, 3, 64, 64}))), ShapeError);
  }

  TEST_CASE("zero head gives zero scores") {
    Discriminator<float> d(4, 3);
    d.head().zero();
    std::mt19937_64 rng(4);
    const auto s = d.discriminate(Var<float>(uniform<float>({1, 1, 32, 32}, rng, 0, 1)));
    for (float v : s.scores.value().storage()) CHECK(v == 0.0f);
    CHECK(s.mean() == 0.0f);
  }

  TEST_CASE("feature stack") {
    Discriminator<float> d(4, 5);
    std::mt19937_64 rng(6);
    const Var<float> x(uniform<float>({1, 1, 64, 64}, rng, 0, 1));
    const auto out = d.forward(x);
    const auto feats = d.extract_features(x);
    REQUIRE(feats.layers.size() == 4);
    const int sides[4] = {32, 16, 8, 7};
    for (int l = 0; l < 4; ++l) {
      CHECK(feats.layers[l].shape() == Shape{1, 4 << l, sides[l], sides[l]});
      CHECK(feats.layers[l].value() == out.features.layers[l].value());
    }
    CHECK(d.discriminate(x).scores.value() == out.scores.scores.value());
  }

  TEST_CASE("same seed, same network") {
    Discriminator<float> a(4, 7), b(4, 7), c(4, 8);
    std::mt19937_64 rng(9);
    const Var<float> x(uniform<float>({1, 1, 32, 32}, rng, 0, 1));
    CHECK(a.discriminate(x).scores.value() == b.discriminate(x).scores.value());
    CHECK(a.discriminate(x).scores.value() != c.discriminate(x).scores.value());
  }

  TEST_CASE("mean score gradient matches finite differences") {
    Discriminator<double> d(2, 10);
    std::mt19937_64 rng(11);
    Var<double> x(uniform<double>({1, 1, 24, 24}, rng, 0, 1), true);
    auto loss = [&] { return ops::mean(d.discriminate(x).scores); };
    auto params = d.parameters();
    CHECK(testing::fd_check(loss, {x}) < 1e-3);
    CHECK(testing::fd_check(loss, {params.params.front().var, params.params.back().var}) < 1e-3);
  }
}
