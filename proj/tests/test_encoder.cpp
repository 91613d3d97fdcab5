#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aspects/encoder.hpp"
#include "support/builders.hpp"
#include "support/reference.hpp"

using namespace aspects;
using Catch::Approx;

TEST_CASE("cosine similarity basics", "[encoder]") {
  std::vector<double> x{0.3, -1.2, 4.0};
  CHECK(cosine_similarity(x, x) == Approx(1.0).margin(1e-9));
  std::vector<double> a{1, 0}, b{0, 1};
  CHECK(cosine_similarity(a, b) == Approx(0.0).margin(1e-15));
  std::vector<double> u{3, 4}, v{4, 3};
  CHECK(cosine_similarity(u, v) == Approx(0.96).margin(1e-12));
  std::vector<double> zero{0, 0};
  CHECK(cosine_similarity(zero, u) == 0.0);
}

TEST_CASE("conv with zero input and zero bias is zero", "[encoder]") {
  Rng rng(1);
  ConvLayer layer;
  detail::init_conv(layer, 3, 2, 4, rng);
  layer.bias.fill(0.0);
  Tensor x({5, 2});
  Tensor out = conv_layer_forward(x, layer);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("single-position convolution matches hand evaluation", "[encoder]") {
  // N=1, F=3, in=k=1: neighbors are zero-padded, only the center tap fires
  ConvLayer layer;
  layer.kernel = Tensor({3, 1, 1});
  layer.kernel.data = {0.7, -0.4, 0.9};  // [a, b, c]
  layer.bias = Tensor({1});
  layer.prelu_alpha = Tensor({1});
  layer.prelu_alpha[0] = 0.25;

  Tensor x({1, 1});
  x[0] = 3.0;
  Tensor out = conv_layer_forward(x, layer);
  // pre-activation = b*x = -1.2 < 0, PReLU multiplies by alpha
  CHECK(out[0] == Approx(0.25 * (-0.4 * 3.0)).margin(1e-15));

  x[0] = -3.0;  // pre = 1.2 > 0
  CHECK(conv_layer_forward(x, layer)[0] == Approx(1.2).margin(1e-15));
}

TEST_CASE("convolution matches the naive triple-loop oracle", "[encoder]") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(7));
    const int in_dim = 1 + static_cast<int>(rng.below(4));
    const int filters = 1 + static_cast<int>(rng.below(4));
    const int window = 2 * static_cast<int>(rng.below(3)) + 1;
    ConvLayer layer;
    detail::init_conv(layer, window, in_dim, filters, rng);
    for (auto& b : layer.bias.data) b = rng.uniform(-1, 1);

    Tensor x({static_cast<std::size_t>(n), static_cast<std::size_t>(in_dim)});
    std::vector<std::vector<double>> x_rows(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      for (int i = 0; i < in_dim; ++i) {
        const double v = rng.uniform(-2, 2);
        x.at(static_cast<std::size_t>(t), static_cast<std::size_t>(i)) = v;
        x_rows[static_cast<std::size_t>(t)].push_back(v);
      }
    }
    const Tensor got = conv_preactivation(x, layer);
    const auto want = ref::conv_naive(x_rows, layer);
    REQUIRE(got.shape[0] == static_cast<std::size_t>(n));  // length preserved
    for (int t = 0; t < n; ++t)
      for (int c = 0; c < filters; ++c)
        CHECK(got.at(static_cast<std::size_t>(t), static_cast<std::size_t>(c)) ==
              Approx(want[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)])
                  .margin(1e-12));
  }
}

TEST_CASE("conv rejects input column mismatch", "[encoder]") {
  Rng rng(3);
  ConvLayer layer;
  detail::init_conv(layer, 3, 4, 2, rng);
  Tensor x({5, 3});
  CHECK_THROWS_AS(conv_preactivation(x, layer), ConfigError);
}

TEST_CASE("init_model is deterministic and respects declared bounds", "[encoder]") {
  auto cfg = testutil::tiny_config();
  AspectModel m1 = init_model(cfg, 11, 0, 123);
  AspectModel m2 = init_model(cfg, 11, 0, 123);
  auto p1 = parameters(m1);
  auto p2 = parameters(m2);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].tensor->data == p2[i].tensor->data);
  AspectModel m3 = init_model(cfg, 11, 0, 124);
  CHECK(m1.conv1.kernel.data != m3.conv1.kernel.data);

  // declared init bounds
  const double r1 = std::sqrt(6.0 / (cfg.window * cfg.embed_dim + cfg.window * cfg.filters));
  for (double v : m1.conv1.kernel.data) CHECK(std::abs(v) <= r1);
  for (double v : m1.embedding.data) CHECK(std::abs(v) <= 0.05);
  const double rg = std::sqrt(6.0 / (cfg.filters + 1.0));
  for (const auto& block : m1.aspects) {
    for (double v : block.gate.w.data) CHECK(std::abs(v) <= rg);
    CHECK(block.gate.b[0] == 0.0);
    for (const auto& layer : block.convs) {
      for (double v : layer.bias.data) CHECK(v == 0.0);
      for (double v : layer.prelu_alpha.data) CHECK(v == 0.25);
    }
  }
  for (std::size_t j = 0; j < m1.embedding.shape[1]; ++j) CHECK(m1.embedding.at(0, j) == 0.0);

  auto bad = cfg;
  bad.window = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(init_model(cfg, 1, 0, 1), ConfigError);
}

TEST_CASE("all-pad document yields zero gates and zero embedding", "[encoder]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 5);
  auto doc = testutil::make_doc(std::vector<int>(static_cast<std::size_t>(cfg.max_len), 0), 0);
  ForwardResult fr = forward_aspect(m, doc, 0);
  for (double g : fr.gates) CHECK(g == 0.0);
  for (double e : fr.embedding) CHECK(e == 0.0);
}

TEST_CASE("scalar single-layer forward matches hand arithmetic", "[encoder]") {
  EncoderConfig cfg;
  cfg.max_len = 1;
  cfg.embed_dim = 1;
  cfg.filters = 1;
  cfg.window = 1;
  cfg.layers = 1;
  cfg.n_aspects = 1;
  AspectModel m = init_model(cfg, 3, 0, 7);
  m.embedding.at(2, 0) = 1.7;
  m.conv1.kernel.data = {0.6};
  m.conv1.bias.data = {0.1};
  m.conv1.prelu_alpha.data = {0.25};
  m.aspects[0].gate.w.data = {-0.8};
  m.aspects[0].gate.b.data = {0.3};

  ForwardResult fr = forward_aspect(m, testutil::make_doc({2}, 1), 0);
  const double h = 0.6 * 1.7 + 0.1;  // positive, PReLU passes through
  const double g = 1.0 / (1.0 + std::exp(-(-0.8 * h + 0.3)));
  CHECK(fr.gates[0] == Approx(g).margin(1e-15));
  CHECK(fr.embedding[0] == Approx(g * h).margin(1e-15));
}

TEST_CASE("first layer is shared across aspects, deeper layers differ", "[encoder]") {
  auto cfg = testutil::tiny_config(6, 4, 3, 3, 2, 2);
  AspectModel m = init_model(cfg, 13, 0, 77);
  Rng rng(8);
  auto doc = testutil::random_doc(cfg.max_len, 13, 5, rng);
  ForwardResult a0 = forward_aspect(m, doc, 0);
  ForwardResult a1 = forward_aspect(m, doc, 1);
  CHECK(a0.cache.outputs[0].data == a1.cache.outputs[0].data);  // bitwise
  CHECK(a0.cache.outputs[1].data != a1.cache.outputs[1].data);
  CHECK(a0.gates != a1.gates);
}

TEST_CASE("gates lie in (0,1) when unmasked and are exactly 0 on padding", "[encoder]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 15);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int true_len = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.max_len + 1)));
    auto doc = testutil::random_doc(cfg.max_len, 9, true_len, rng);
    ForwardResult fr = forward_aspect(m, doc, static_cast<int>(rng.below(2)));
    for (int t = 0; t < cfg.max_len; ++t) {
      if (t < true_len) {
        CHECK(fr.gates[static_cast<std::size_t>(t)] > 0.0);
        CHECK(fr.gates[static_cast<std::size_t>(t)] < 1.0);
      } else {
        CHECK(fr.gates[static_cast<std::size_t>(t)] == 0.0);
      }
    }
  }
}

TEST_CASE("pooled embedding is the gate-weighted sum of the residual stack", "[encoder]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 31);
  Rng rng(4);
  auto doc = testutil::random_doc(cfg.max_len, 9, cfg.max_len, rng);
  ForwardResult fr = forward_aspect(m, doc, 1);

  // recompute the pooling from the cache; doubling the stack with gates held
  // fixed must double the embedding
  std::vector<double> recomputed(static_cast<std::size_t>(cfg.filters), 0.0);
  for (int t = 0; t < cfg.max_len; ++t)
    for (int c = 0; c < cfg.filters; ++c)
      recomputed[static_cast<std::size_t>(c)] +=
          fr.gates[static_cast<std::size_t>(t)] *
          fr.cache.residual_sum.at(static_cast<std::size_t>(t), static_cast<std::size_t>(c));
  for (int c = 0; c < cfg.filters; ++c)
    CHECK(recomputed[static_cast<std::size_t>(c)] ==
          Approx(fr.embedding[static_cast<std::size_t>(c)]).margin(1e-12));

  std::vector<double> doubled(static_cast<std::size_t>(cfg.filters), 0.0);
  for (int t = 0; t < cfg.max_len; ++t)
    for (int c = 0; c < cfg.filters; ++c)
      doubled[static_cast<std::size_t>(c)] +=
          fr.gates[static_cast<std::size_t>(t)] * 2.0 *
          fr.cache.residual_sum.at(static_cast<std::size_t>(t), static_cast<std::size_t>(c));
  for (int c = 0; c < cfg.filters; ++c)
    CHECK(doubled[static_cast<std::size_t>(c)] ==
          Approx(2.0 * fr.embedding[static_cast<std::size_t>(c)]).margin(1e-12));
}

TEST_CASE("swapping aspect blocks permutes per-aspect outputs", "[encoder]") {
  auto cfg = testutil::tiny_config(6, 4, 3, 3, 3, 2);
  AspectModel m = init_model(cfg, 9, 0, 19);
  Rng rng(6);
  auto doc = testutil::random_doc(cfg.max_len, 9, 5, rng);
  ForwardResult before0 = forward_aspect(m, doc, 0);
  ForwardResult before1 = forward_aspect(m, doc, 1);

  AspectModel swapped = m;
  std::swap(swapped.aspects[0], swapped.aspects[1]);
  ForwardResult after0 = forward_aspect(swapped, doc, 0);
  ForwardResult after1 = forward_aspect(swapped, doc, 1);
  CHECK(after0.embedding == before1.embedding);
  CHECK(after1.embedding == before0.embedding);
  CHECK(after0.cache.outputs[0].data == before0.cache.outputs[0].data);
}

TEST_CASE("forward matches the straight-line reference encoder", "[encoder]") {
  Rng rng(123);
  for (bool gate_on_last : {false, true}) {
    auto cfg = testutil::tiny_config(7, 3, 4, 3, 3, 2);
    cfg.gate_on_last = gate_on_last;
    AspectModel m = init_model(cfg, 10, 0, 321);
    auto doc = testutil::random_doc(cfg.max_len, 10, 6, rng);
    for (int aspect = 0; aspect < 2; ++aspect) {
      ForwardResult fr = forward_aspect(m, doc, aspect);
      std::vector<double> ref_gates;
      const auto ref_embed = ref::encode_doc_naive(m, doc, aspect, &ref_gates);
      for (int c = 0; c < cfg.filters; ++c)
        CHECK(fr.embedding[static_cast<std::size_t>(c)] ==
              Approx(ref_embed[static_cast<std::size_t>(c)]).margin(1e-12));
      for (int t = 0; t < doc.true_len; ++t)
        CHECK(fr.gates[static_cast<std::size_t>(t)] ==
              Approx(ref_gates[static_cast<std::size_t>(t)]).margin(1e-13));
    }
  }
}

TEST_CASE("forward rejects wrong document length and bad aspect", "[encoder]") {
  auto cfg = testutil::tiny_config();
  AspectModel m = init_model(cfg, 9, 0, 1);
  auto short_doc = testutil::make_doc({2, 3}, 2);
  CHECK_THROWS_AS(forward_aspect(m, short_doc, 0), DataError);
  auto ok_doc = testutil::make_doc(std::vector<int>(static_cast<std::size_t>(cfg.max_len), 2),
                                   cfg.max_len);
  CHECK_THROWS_AS(forward_aspect(m, ok_doc, 5), ConfigError);
}
