// Model parameters for the gated convolutional aspect encoder.
//
// One embedding table and one first convolutional layer are shared across
// aspects; each aspect owns the remaining conv layers and a gate head. The
// pad embedding row is all-zero and never trained.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aspects/common.hpp"
#include "aspects/rng.hpp"
#include "aspects/tensor.hpp"

namespace aspects {

struct EncoderConfig {
  int max_len = 0;      // N: fixed input length
  int embed_dim = 200;  // m
  int filters = 200;    // k: feature maps per conv layer
  int window = 5;       // F: kernel window, odd
  int layers = 3;       // L >= 1
  int n_aspects = 0;
  double lambda_l2 = 1e-5;
  double lambda_l1 = 1e-6;
  // Gate-head input: false = sum of all conv layer outputs (default),
  // true = raw output of the final layer. The pooled representation is the
  // sum either way.
  bool gate_on_last = false;

  void validate() const {
    if (max_len < 1) throw ConfigError("config: max_len must be >= 1");
    if (embed_dim < 1) throw ConfigError("config: embed_dim must be >= 1");
    if (filters < 1) throw ConfigError("config: filters must be >= 1");
    if (window < 1) throw ConfigError("config: window must be >= 1");
    if (window % 2 == 0)
      throw ConfigError("config: window must be odd so zero-padding preserves length");
    if (layers < 1) throw ConfigError("config: layers must be >= 1");
    if (n_aspects < 1) throw ConfigError("config: n_aspects must be >= 1");
    if (lambda_l2 < 0 || lambda_l1 < 0)
      throw ConfigError("config: regularization coefficients must be >= 0");
  }
};

struct ConvLayer {
  Tensor kernel;       // {window, in_dim, filters}
  Tensor bias;         // {filters}
  Tensor prelu_alpha;  // {filters}, channel-wise slope
};

struct GateHead {
  Tensor w;  // {filters}
  Tensor b;  // {1}
};

struct AspectModel {
  EncoderConfig config;
  Tensor embedding;  // {vocab_size, embed_dim}; row pad_id stays zero
  ConvLayer conv1;   // shared across aspects
  struct AspectBlock {
    std::vector<ConvLayer> convs;  // layers 2..L (empty when layers == 1)
    GateHead gate;
  };
  std::vector<AspectBlock> aspects;
  int pad_id = 0;

  int vocab_size() const { return static_cast<int>(embedding.shape[0]); }
};

constexpr double kPReluInit = 0.25;

namespace detail {

inline void init_conv(ConvLayer& layer, int window, int in_dim, int filters, Rng& rng) {
  layer.kernel = Tensor({static_cast<std::size_t>(window),
                         static_cast<std::size_t>(in_dim),
                         static_cast<std::size_t>(filters)});
  const double fan_in = static_cast<double>(window) * in_dim;
  const double fan_out = static_cast<double>(window) * filters;
  const double r = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : layer.kernel.data) v = rng.uniform(-r, r);
  layer.bias = Tensor({static_cast<std::size_t>(filters)});
  layer.prelu_alpha = Tensor({static_cast<std::size_t>(filters)});
  layer.prelu_alpha.fill(kPReluInit);
}

}  // namespace detail

inline AspectModel init_model(const EncoderConfig& config, int vocab_size, int pad_id,
                              std::uint64_t seed) {
  config.validate();
  if (vocab_size < 2) throw ConfigError("init_model: vocab_size must be >= 2");
  if (pad_id < 0 || pad_id >= vocab_size) throw ConfigError("init_model: pad_id out of range");

  Rng rng = Rng(seed).fork("model-init");
  AspectModel m;
  m.config = config;
  m.pad_id = pad_id;

  m.embedding = Tensor({static_cast<std::size_t>(vocab_size),
                        static_cast<std::size_t>(config.embed_dim)});
  for (auto& v : m.embedding.data) v = rng.uniform(-0.05, 0.05);
  for (int j = 0; j < config.embed_dim; ++j)
    m.embedding.at(static_cast<std::size_t>(pad_id), static_cast<std::size_t>(j)) = 0.0;

  detail::init_conv(m.conv1, config.window, config.embed_dim, config.filters, rng);

  m.aspects.resize(static_cast<std::size_t>(config.n_aspects));
  for (auto& block : m.aspects) {
    block.convs.resize(static_cast<std::size_t>(config.layers - 1));
    for (auto& layer : block.convs)
      detail::init_conv(layer, config.window, config.filters, config.filters, rng);
    const double r = std::sqrt(6.0 / (config.filters + 1.0));
    block.gate.w = Tensor({static_cast<std::size_t>(config.filters)});
    for (auto& v : block.gate.w.data) v = rng.uniform(-r, r);
    block.gate.b = Tensor({1});
  }
  return m;
}

// Canonical flat view of all trainable tensors. Gradients, Adam moments and
// checkpoints all use this order, so index i always refers to the same block.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};
struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

inline std::vector<ParamRef> parameters(AspectModel& m) {
  std::vector<ParamRef> out;
  out.push_back({"embedding", &m.embedding});
  out.push_back({"conv1.kernel", &m.conv1.kernel});
  out.push_back({"conv1.bias", &m.conv1.bias});
  out.push_back({"conv1.prelu_alpha", &m.conv1.prelu_alpha});
  for (std::size_t a = 0; a < m.aspects.size(); ++a) {
    const std::string prefix = "aspect" + std::to_string(a) + ".";
    for (std::size_t l = 0; l < m.aspects[a].convs.size(); ++l) {
      const std::string conv = prefix + "conv" + std::to_string(l + 2) + ".";
      out.push_back({conv + "kernel", &m.aspects[a].convs[l].kernel});
      out.push_back({conv + "bias", &m.aspects[a].convs[l].bias});
      out.push_back({conv + "prelu_alpha", &m.aspects[a].convs[l].prelu_alpha});
    }
    out.push_back({prefix + "gate.w", &m.aspects[a].gate.w});
    out.push_back({prefix + "gate.b", &m.aspects[a].gate.b});
  }
  return out;
}

inline std::vector<ConstParamRef> parameters(const AspectModel& m) {
  auto mut = parameters(const_cast<AspectModel&>(m));
  std::vector<ConstParamRef> out;
  out.reserve(mut.size());
  for (auto& p : mut) out.push_back({p.name, p.tensor});
  return out;
}

// Gradient of the objective, one tensor per parameter in canonical order.
struct GradientSet {
  std::vector<Tensor> tensors;

  static GradientSet zeros_of(const AspectModel& m) {
    GradientSet g;
    for (const auto& p : parameters(m)) g.tensors.emplace_back(p.tensor->shape);
    return g;
  }

  Tensor& operator[](std::size_t i) { return tensors[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }
};

// Index arithmetic matching parameters() order.
struct ParamLayout {
  int layers;
  explicit ParamLayout(const EncoderConfig& c) : layers(c.layers) {}

  static constexpr std::size_t embedding = 0;
  static constexpr std::size_t conv1_kernel = 1;
  static constexpr std::size_t conv1_bias = 2;
  static constexpr std::size_t conv1_alpha = 3;

  std::size_t per_aspect() const { return 3 * static_cast<std::size_t>(layers - 1) + 2; }
  std::size_t aspect_base(int a) const { return 4 + static_cast<std::size_t>(a) * per_aspect(); }
  // l counts per-aspect conv layers from 0 (i.e. model layer l+2).
  std::size_t aspect_kernel(int a, int l) const { return aspect_base(a) + 3 * static_cast<std::size_t>(l); }
  std::size_t aspect_bias(int a, int l) const { return aspect_kernel(a, l) + 1; }
  std::size_t aspect_alpha(int a, int l) const { return aspect_kernel(a, l) + 2; }
  std::size_t gate_w(int a) const { return aspect_base(a) + 3 * static_cast<std::size_t>(layers - 1); }
  std::size_t gate_b(int a) const { return gate_w(a) + 1; }
};

// Sum of squared parameter entries for the L2 term; the pad embedding row is
// non-trainable and excluded.
inline double l2_sum_squares(const AspectModel& m) {
  double s = 0.0;
  for (const auto& p : parameters(m)) s += p.tensor->sum_squares();
  const double* pad = m.embedding.row(static_cast<std::size_t>(m.pad_id));
  for (std::size_t j = 0; j < m.embedding.shape[1]; ++j) s -= pad[j] * pad[j];
  return s;
}

}  // namespace aspects
