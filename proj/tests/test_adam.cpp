#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aspects/adam.hpp"
#include "support/builders.hpp"

using namespace aspects;
using Catch::Approx;

TEST_CASE("zero gradients leave parameters and moments unchanged", "[adam]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 61);
  AspectModel before = m;
  AdamState state = AdamState::zeros_of(m);
  GradientSet zeros = GradientSet::zeros_of(m);
  TrainConfig tc;
  adam_step(m, zeros, state, tc);
  CHECK(state.step == 1);
  auto pa = parameters(m);
  auto pb = parameters(before);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].tensor->data == pb[i].tensor->data);  // bitwise
    for (double v : state.first_moment[i].data) CHECK(v == 0.0);
    for (double v : state.second_moment[i].data) CHECK(v == 0.0);
  }
}

TEST_CASE("first step with unit gradient matches the bias-corrected formula", "[adam]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 62);
  const double theta0 = m.conv1.bias[0];
  GradientSet grads = GradientSet::zeros_of(m);
  grads[ParamLayout::conv1_bias].data[0] = 1.0;
  AdamState state = AdamState::zeros_of(m);
  TrainConfig tc;

  adam_step(m, grads, state, tc);
  // m1 = (1-b1)*g, v1 = (1-b2)*g^2; bias correction makes m_hat = v_hat = 1,
  // so the update is -lr / (1 + eps)
  const double expected = theta0 - tc.learning_rate * 1.0 / (1.0 + tc.adam_eps);
  CHECK(m.conv1.bias[0] == Approx(expected).margin(1e-18));
  CHECK(std::abs(m.conv1.bias[0] - theta0 + tc.learning_rate) < 1e-9);
  // untouched entries stay bitwise identical
  CHECK(m.conv1.bias[1] == init_model(cfg, 9, 0, 62).conv1.bias[1]);
}

TEST_CASE("ten seeded steps are bit-reproducible", "[adam]") {
  auto cfg = testutil::tiny_config();
  auto run = [&] {
    AspectModel m = init_model(cfg, 9, 0, 63);
    AdamState state = AdamState::zeros_of(m);
    TrainConfig tc;
    Rng rng(64);
    for (int step = 0; step < 10; ++step) {
      GradientSet grads = GradientSet::zeros_of(m);
      for (std::size_t i = 0; i < grads.size(); ++i)
        for (auto& v : grads[i].data) v = rng.uniform(-1, 1);
      adam_step(m, grads, state, tc);
    }
    return m;
  };
  AspectModel a = run();
  AspectModel b = run();
  auto pa = parameters(a);
  auto pb = parameters(b);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].tensor->data == pb[i].tensor->data);
}

TEST_CASE("non-finite gradients fail fast", "[adam]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 65);
  AdamState state = AdamState::zeros_of(m);
  GradientSet grads = GradientSet::zeros_of(m);
  grads[ParamLayout::conv1_kernel].data[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  CHECK_THROWS_AS(adam_step(m, grads, state, tc), NumericError);
}

TEST_CASE("pad embedding row survives updates untouched", "[adam]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 66);
  AdamState state = AdamState::zeros_of(m);
  GradientSet grads = GradientSet::zeros_of(m);
  for (auto& v : grads[ParamLayout::embedding].data) v = 0.5;
  TrainConfig tc;
  adam_step(m, grads, state, tc);
  for (std::size_t j = 0; j < m.embedding.shape[1]; ++j) CHECK(m.embedding.at(0, j) == 0.0);
  // a non-pad row did move
  CHECK(m.embedding.at(2, 0) != init_model(cfg, 9, 0, 66).embedding.at(2, 0));
}
