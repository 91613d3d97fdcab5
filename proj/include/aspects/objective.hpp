// Triplet max-margin objective with L2 weight decay and an L1 sparsity
// penalty on the gates of every document the encoder touches.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aspects/encoder.hpp"
#include "aspects/model.hpp"

namespace aspects {

struct TrainConfig {
  double margin = 1.0;  // the constant inside the max-margin loss
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int epochs = 30;
  int patience = 5;  // early stopping on validation objective; <= 0 disables
  std::uint64_t seed = 0;
  double lambda_l2 = 1e-5;  // mirror EncoderConfig
  double lambda_l1 = 1e-6;

  void validate() const {
    if (margin < 0) throw ConfigError("train config: margin must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    if (learning_rate < 0) throw ConfigError("train config: learning_rate must be >= 0");
    if (lambda_l2 < 0 || lambda_l1 < 0)
      throw ConfigError("train config: regularization coefficients must be >= 0");
  }
};

struct TripletItem {
  EncodedDocument similar;    // s
  EncodedDocument anchor;     // d
  EncodedDocument dissimilar; // o
  int aspect = 0;
  // Sampling provenance, used by tests and diagnostics; empty for hand-built
  // triplets.
  std::string s1_id, s1_prime_id, s2_id;
};

struct TripletBatch {
  std::vector<TripletItem> items;
};

inline double triplet_hinge_loss(std::span<const double> e_s, std::span<const double> e_d,
                                 std::span<const double> e_o, double margin) {
  const double loss =
      margin - cosine_similarity(e_d, e_s) + cosine_similarity(e_d, e_o);
  return loss > 0.0 ? loss : 0.0;
}

// Everything backward() needs from the forward sweep.
struct BatchForward {
  // per triplet: forwards for s, d, o in that order, all under the triplet's
  // aspect encoder
  std::vector<std::array<ForwardResult, 3>> forwards;
  std::vector<double> cos_ds;
  std::vector<double> cos_do;
  std::vector<double> hinges;
  double hinge_mean = 0.0;
  double l2_term = 0.0;
  double l1_term = 0.0;
  double total = 0.0;
  double gate_sum = 0.0;       // over unmasked positions of all documents
  std::size_t gate_count = 0;  // number of unmasked positions
};

inline BatchForward forward_batch(const AspectModel& model, const TripletBatch& batch,
                                  const TrainConfig& cfg) {
  if (batch.items.empty()) throw DataError("forward_batch: empty batch");
  BatchForward out;
  out.forwards.reserve(batch.items.size());

  double hinge_sum = 0.0;
  double doc_gate_sum = 0.0;  // sum over docs of per-doc gate sums
  for (const auto& item : batch.items) {
    std::array<ForwardResult, 3> f = {forward_aspect(model, item.similar, item.aspect),
                                      forward_aspect(model, item.anchor, item.aspect),
                                      forward_aspect(model, item.dissimilar, item.aspect)};
    const double cds = cosine_similarity(f[1].embedding, f[0].embedding);
    const double cdo = cosine_similarity(f[1].embedding, f[2].embedding);
    const double raw = cfg.margin - cds + cdo;
    const double hinge = raw > 0.0 ? raw : 0.0;
    out.cos_ds.push_back(cds);
    out.cos_do.push_back(cdo);
    out.hinges.push_back(hinge);
    hinge_sum += hinge;
    for (const auto& fr : f) {
      for (int t = 0; t < fr.cache.true_len; ++t) {
        doc_gate_sum += fr.gates[static_cast<std::size_t>(t)];
      }
      out.gate_count += static_cast<std::size_t>(fr.cache.true_len);
    }
    out.forwards.push_back(std::move(f));
  }

  const double n_triplets = static_cast<double>(batch.items.size());
  const double n_docs = 3.0 * n_triplets;
  out.hinge_mean = hinge_sum / n_triplets;
  out.l2_term = cfg.lambda_l2 * l2_sum_squares(model);
  out.l1_term = cfg.lambda_l1 * (doc_gate_sum / n_docs);
  out.gate_sum = doc_gate_sum;
  out.total = out.hinge_mean + out.l2_term + out.l1_term;
  return out;
}

// Objective value plus per-triplet hinge losses.
inline std::pair<double, std::vector<double>> total_objective(const AspectModel& model,
                                                              const TripletBatch& batch,
                                                              const TrainConfig& cfg) {
  BatchForward bf = forward_batch(model, batch, cfg);
  return {bf.total, std::move(bf.hinges)};
}

}  // namespace aspects
