// Forward pass of the gated convolutional aspect encoder.
//
// Pipeline per aspect: embed ids, shared first conv layer, then per-aspect
// layers where layer l consumes the elementwise sum of all previous layer
// outputs. The gated representation is the sum over all layers; gates are
// sigmoid scores per position, forced to zero on padding so document length
// artifacts cannot leak into the pooled embedding.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "aspects/model.hpp"
#include "aspects/vocab.hpp"

namespace aspects {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Cosine with an epsilon-guarded denominator so zero vectors compare as 0;
// clamped to [-1,1] to absorb rounding.
inline constexpr double kCosineEps = 1e-12;

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  const double denom = std::sqrt(nu) * std::sqrt(nv) + kCosineEps;
  return std::clamp(dot / denom, -1.0, 1.0);
}

// X * K + b over positions with zero-padding outside [0, N); X is {N, in},
// result {N, filters}. Rows are initialized with the bias and accumulated
// with the innermost loop over filters, which is contiguous in both the
// kernel slice and the output row.
inline Tensor conv_preactivation(const Tensor& x, const ConvLayer& layer) {
  const std::size_t n = x.shape[0];
  const std::size_t in_dim = x.shape[1];
  const std::size_t window = layer.kernel.shape[0];
  const std::size_t filters = layer.kernel.shape[2];
  if (layer.kernel.shape[1] != in_dim)
    throw ConfigError("conv: input has " + std::to_string(in_dim) +
                      " columns but kernel expects " + std::to_string(layer.kernel.shape[1]));
  const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(window - 1) / 2;

  Tensor out({n, filters});
  for (std::size_t t = 0; t < n; ++t) {
    double* out_row = out.row(t);
    for (std::size_t c = 0; c < filters; ++c) out_row[c] = layer.bias[c];
    for (std::size_t j = 0; j < window; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                 static_cast<std::ptrdiff_t>(j) - offset;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      const double* x_row = x.row(static_cast<std::size_t>(src));
      for (std::size_t i = 0; i < in_dim; ++i) {
        const double xv = x_row[i];
        if (xv == 0.0) continue;
        const double* k_row = &layer.kernel.data[(j * in_dim + i) * filters];
        for (std::size_t c = 0; c < filters; ++c) out_row[c] += xv * k_row[c];
      }
    }
  }
  return out;
}

inline Tensor prelu(const Tensor& pre, const Tensor& alpha) {
  Tensor out(pre.shape);
  const std::size_t filters = pre.shape[1];
  for (std::size_t t = 0; t < pre.shape[0]; ++t) {
    const double* in_row = pre.row(t);
    double* out_row = out.row(t);
    for (std::size_t c = 0; c < filters; ++c) {
      const double v = in_row[c];
      out_row[c] = v > 0.0 ? v : alpha[c] * v;
    }
  }
  return out;
}

inline Tensor conv_layer_forward(const Tensor& x, const ConvLayer& layer) {
  return prelu(conv_preactivation(x, layer), layer.prelu_alpha);
}

// Intermediates retained for backprop.
struct ForwardCache {
  int aspect = -1;
  int true_len = 0;
  std::vector<int> ids;
  std::vector<Tensor> inputs;   // X_l per layer; inputs[0] is the embedded doc
  std::vector<Tensor> preact;   // conv output before activation, per layer
  std::vector<Tensor> outputs;  // activated output per layer
  Tensor residual_sum;          // sum of all layer outputs
  std::vector<double> logits;   // pre-sigmoid gate scores, valid below true_len
};

struct ForwardResult {
  std::vector<double> embedding;  // pooled aspect embedding, length = filters
  std::vector<double> gates;      // length N; exactly 0 at padded positions
  ForwardCache cache;
};

inline ForwardResult forward_aspect(const AspectModel& model, const EncodedDocument& doc,
                                    int aspect) {
  const EncoderConfig& cfg = model.config;
  if (aspect < 0 || aspect >= cfg.n_aspects)
    throw ConfigError("forward_aspect: aspect index out of range");
  if (static_cast<int>(doc.ids.size()) != cfg.max_len)
    throw DataError("forward_aspect: document length " + std::to_string(doc.ids.size()) +
                    " != configured max_len " + std::to_string(cfg.max_len));

  const auto n = static_cast<std::size_t>(cfg.max_len);
  const auto m = static_cast<std::size_t>(cfg.embed_dim);
  const auto k = static_cast<std::size_t>(cfg.filters);
  const auto& block = model.aspects[static_cast<std::size_t>(aspect)];

  ForwardResult r;
  r.cache.aspect = aspect;
  r.cache.true_len = doc.true_len;
  r.cache.ids = doc.ids;

  Tensor embedded({n, m});
  for (std::size_t t = 0; t < n; ++t) {
    const double* src = model.embedding.row(static_cast<std::size_t>(doc.ids[t]));
    std::copy(src, src + m, embedded.row(t));
  }

  r.cache.inputs.push_back(std::move(embedded));
  r.cache.preact.push_back(conv_preactivation(r.cache.inputs[0], model.conv1));
  r.cache.outputs.push_back(prelu(r.cache.preact[0], model.conv1.prelu_alpha));

  Tensor running = r.cache.outputs[0];  // sum of outputs so far
  for (int l = 2; l <= cfg.layers; ++l) {
    const ConvLayer& layer = block.convs[static_cast<std::size_t>(l - 2)];
    r.cache.inputs.push_back(running);
    r.cache.preact.push_back(conv_preactivation(running, layer));
    r.cache.outputs.push_back(prelu(r.cache.preact.back(), layer.prelu_alpha));
    const Tensor& h = r.cache.outputs.back();
    for (std::size_t i = 0; i < running.size(); ++i) running.data[i] += h.data[i];
  }
  r.cache.residual_sum = std::move(running);

  const Tensor& gate_src =
      cfg.gate_on_last ? r.cache.outputs.back() : r.cache.residual_sum;
  r.cache.logits.assign(n, 0.0);
  r.gates.assign(n, 0.0);
  r.embedding.assign(k, 0.0);
  const auto true_len = static_cast<std::size_t>(doc.true_len);
  for (std::size_t t = 0; t < true_len; ++t) {
    const double* row = gate_src.row(t);
    double z = block.gate.b[0];
    for (std::size_t c = 0; c < k; ++c) z += row[c] * block.gate.w[c];
    r.cache.logits[t] = z;
    const double g = sigmoid(z);
    r.gates[t] = g;
    const double* h_row = r.cache.residual_sum.row(t);
    for (std::size_t c = 0; c < k; ++c) r.embedding[c] += g * h_row[c];
  }
  return r;
}

}  // namespace aspects
