// Hand-written analytic gradients of the full objective: chain rule through
// the cosine hinge, the gate sigmoid, the residual sums, PReLU, the
// convolutions and the embedding lookup. Checked against central finite
// differences in the test suite.
//
// Conventions fixed here (and matched by the forward pass):
//   - hinge subgradient at exactly zero is 0 (inactive);
//   - the [-1,1] cosine clamp passes gradients through (it only absorbs
//     rounding);
//   - PReLU derivative at exactly zero takes the alpha branch;
//   - the epsilon in the cosine denominator is part of the differentiated
//     function, so gradients match finite differences tightly.
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "aspects/objective.hpp"

namespace aspects {

namespace detail {

struct CosineGrad {
  std::vector<double> du, dv;
};

// Gradient of dot(u,v) / (|u||v| + eps) w.r.t. both arguments.
inline CosineGrad cosine_gradient(std::span<const double> u, std::span<const double> v) {
  const std::size_t k = u.size();
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  const double denom = nu * nv + kCosineEps;
  const double inv = 1.0 / denom;
  // d(denom)/du = nv * u / nu; the norm term vanishes in the nu -> 0 limit
  // because dot -> 0 as well.
  const double cu = nu > 0.0 ? dot * nv / (nu * denom * denom) : 0.0;
  const double cv = nv > 0.0 ? dot * nu / (nv * denom * denom) : 0.0;
  CosineGrad g;
  g.du.resize(k);
  g.dv.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    g.du[i] = v[i] * inv - cu * u[i];
    g.dv[i] = u[i] * inv - cv * v[i];
  }
  return g;
}

// Backprop one document's encoder pass. d_embed is dJ/d(pooled embedding);
// l1_coeff is added to dJ/dg_t at every unmasked position.
inline void document_backward(const AspectModel& model, const ForwardResult& fr,
                              std::span<const double> d_embed, double l1_coeff,
                              GradientSet& grads) {
  const EncoderConfig& cfg = model.config;
  const ParamLayout layout(cfg);
  const auto n = static_cast<std::size_t>(cfg.max_len);
  const auto k = static_cast<std::size_t>(cfg.filters);
  const auto true_len = static_cast<std::size_t>(fr.cache.true_len);
  const int aspect = fr.cache.aspect;
  const auto& block = model.aspects[static_cast<std::size_t>(aspect)];
  const std::size_t n_layers = fr.cache.outputs.size();

  const Tensor& h_sum = fr.cache.residual_sum;
  const Tensor& gate_src = cfg.gate_on_last ? fr.cache.outputs.back() : h_sum;

  // Pooling and gate head. Masked positions have g == 0 and no gate-head
  // contribution, so they only appear through the pooling sum, where g == 0
  // kills them.
  Tensor d_hsum({n, k});
  Tensor d_gate_src_extra;  // only used when the gate reads the last layer
  if (cfg.gate_on_last) d_gate_src_extra = Tensor({n, k});
  Tensor* d_gate_target = cfg.gate_on_last ? &d_gate_src_extra : &d_hsum;

  Tensor& d_gate_w = grads[layout.gate_w(aspect)];
  Tensor& d_gate_b = grads[layout.gate_b(aspect)];
  for (std::size_t t = 0; t < true_len; ++t) {
    const double g = fr.gates[t];
    const double* hs_row = h_sum.row(t);
    double dg = l1_coeff;
    for (std::size_t c = 0; c < k; ++c) dg += d_embed[c] * hs_row[c];
    const double dz = dg * g * (1.0 - g);

    double* dhs_row = d_hsum.row(t);
    for (std::size_t c = 0; c < k; ++c) dhs_row[c] += g * d_embed[c];

    const double* src_row = gate_src.row(t);
    double* dtarget_row = d_gate_target->row(t);
    for (std::size_t c = 0; c < k; ++c) {
      d_gate_w[c] += dz * src_row[c];
      dtarget_row[c] += dz * block.gate.w[c];
    }
    d_gate_b[0] += dz;
  }

  // Every layer output feeds the residual sum once; later layers' inputs add
  // more paths below.
  std::vector<Tensor> d_h;
  d_h.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) d_h.push_back(d_hsum);
  if (cfg.gate_on_last) {
    Tensor& last = d_h.back();
    for (std::size_t i = 0; i < last.size(); ++i) last.data[i] += d_gate_src_extra.data[i];
  }

  auto conv_backward = [&](const ConvLayer& layer, const Tensor& x, const Tensor& preact,
                           const Tensor& d_out, Tensor& d_kernel, Tensor& d_bias,
                           Tensor& d_alpha, Tensor* d_x) {
    const std::size_t in_dim = x.shape[1];
    const std::size_t window = layer.kernel.shape[0];
    const std::size_t filters = layer.kernel.shape[2];
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(window - 1) / 2;

    // Through the activation first.
    Tensor d_pre({n, filters});
    for (std::size_t t = 0; t < n; ++t) {
      const double* a_row = preact.row(t);
      const double* dout_row = d_out.row(t);
      double* dpre_row = d_pre.row(t);
      for (std::size_t c = 0; c < filters; ++c) {
        if (a_row[c] > 0.0) {
          dpre_row[c] = dout_row[c];
        } else {
          dpre_row[c] = dout_row[c] * layer.prelu_alpha[c];
          d_alpha[c] += dout_row[c] * a_row[c];
        }
      }
    }

    for (std::size_t t = 0; t < n; ++t) {
      const double* dpre_row = d_pre.row(t);
      for (std::size_t c = 0; c < filters; ++c) d_bias[c] += dpre_row[c];
      for (std::size_t j = 0; j < window; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                   static_cast<std::ptrdiff_t>(j) - offset;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const double* x_row = x.row(static_cast<std::size_t>(src));
        double* dx_row = d_x ? d_x->row(static_cast<std::size_t>(src)) : nullptr;
        for (std::size_t i = 0; i < in_dim; ++i) {
          const double xv = x_row[i];
          const double* k_row = &layer.kernel.data[(j * in_dim + i) * filters];
          double* dk_row = &d_kernel.data[(j * in_dim + i) * filters];
          double acc = 0.0;
          for (std::size_t c = 0; c < filters; ++c) {
            dk_row[c] += xv * dpre_row[c];
            acc += k_row[c] * dpre_row[c];
          }
          if (dx_row) dx_row[i] += acc;
        }
      }
    }
  };

  // Per-aspect layers, deepest first. Layer index l (0-based) consumed
  // inputs[l] = sum of outputs[0..l-1], so its input gradient fans out to
  // every earlier layer.
  for (std::size_t l = n_layers - 1; l >= 1; --l) {
    const ConvLayer& layer = block.convs[l - 1];
    Tensor d_x({n, k});
    conv_backward(layer, fr.cache.inputs[l], fr.cache.preact[l], d_h[l],
                  grads[layout.aspect_kernel(aspect, static_cast<int>(l) - 1)],
                  grads[layout.aspect_bias(aspect, static_cast<int>(l) - 1)],
                  grads[layout.aspect_alpha(aspect, static_cast<int>(l) - 1)], &d_x);
    for (std::size_t j = 0; j < l; ++j) {
      Tensor& target = d_h[j];
      for (std::size_t i = 0; i < target.size(); ++i) target.data[i] += d_x.data[i];
    }
  }

  // Shared first layer down to the embedding rows.
  Tensor d_embedded({n, static_cast<std::size_t>(cfg.embed_dim)});
  conv_backward(model.conv1, fr.cache.inputs[0], fr.cache.preact[0], d_h[0],
                grads[ParamLayout::conv1_kernel], grads[ParamLayout::conv1_bias],
                grads[ParamLayout::conv1_alpha], &d_embedded);

  Tensor& d_emb_table = grads[ParamLayout::embedding];
  const auto m = static_cast<std::size_t>(cfg.embed_dim);
  for (std::size_t t = 0; t < n; ++t) {
    const int id = fr.cache.ids[t];
    if (id == model.pad_id) continue;  // pad row is not trainable
    double* dst = d_emb_table.row(static_cast<std::size_t>(id));
    const double* src = d_embedded.row(t);
    for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
  }
}

}  // namespace detail

inline GradientSet backward(const AspectModel& model, const TripletBatch& batch,
                            const TrainConfig& cfg, const BatchForward& fwd) {
  if (fwd.forwards.size() != batch.items.size())
    throw DataError("backward: forward cache does not match batch");
  GradientSet grads = GradientSet::zeros_of(model);

  // L2 term: 2 * lambda * theta for every trainable entry.
  if (cfg.lambda_l2 != 0.0) {
    auto params = parameters(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor& theta = *params[i].tensor;
      Tensor& g = grads[i];
      for (std::size_t j = 0; j < theta.size(); ++j) g.data[j] += 2.0 * cfg.lambda_l2 * theta.data[j];
    }
  }

  const double n_triplets = static_cast<double>(batch.items.size());
  const double l1_coeff = cfg.lambda_l1 / (3.0 * n_triplets);
  const auto k = static_cast<std::size_t>(model.config.filters);

  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& f = fwd.forwards[i];
    const bool active = (cfg.margin - fwd.cos_ds[i] + fwd.cos_do[i]) > 0.0;
    if (!active && cfg.lambda_l1 == 0.0) continue;

    std::vector<double> de_s(k, 0.0), de_d(k, 0.0), de_o(k, 0.0);
    if (active) {
      const double d_cds = -1.0 / n_triplets;
      const double d_cdo = 1.0 / n_triplets;
      const auto g_ds = detail::cosine_gradient(f[1].embedding, f[0].embedding);
      const auto g_do = detail::cosine_gradient(f[1].embedding, f[2].embedding);
      for (std::size_t c = 0; c < k; ++c) {
        de_d[c] = d_cds * g_ds.du[c] + d_cdo * g_do.du[c];
        de_s[c] = d_cds * g_ds.dv[c];
        de_o[c] = d_cdo * g_do.dv[c];
      }
    }
    detail::document_backward(model, f[0], de_s, l1_coeff, grads);
    detail::document_backward(model, f[1], de_d, l1_coeff, grads);
    detail::document_backward(model, f[2], de_o, l1_coeff, grads);
  }

  // The pad embedding row stays exactly zero no matter what fed it.
  {
    Tensor& d_emb = grads[ParamLayout::embedding];
    double* pad_row = d_emb.row(static_cast<std::size_t>(model.pad_id));
    for (std::size_t j = 0; j < d_emb.shape[1]; ++j) pad_row[j] = 0.0;
  }
  return grads;
}

inline GradientSet backward(const AspectModel& model, const TripletBatch& batch,
                            const TrainConfig& cfg) {
  return backward(model, batch, cfg, forward_batch(model, batch, cfg));
}

}  // namespace aspects
