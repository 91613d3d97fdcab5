// Training loop: round-robin aspect scheduling, fixed validation triplets,
// early stopping on the validation objective, deterministic given the seed.
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/adam.hpp"
#include "aspects/checkpoint.hpp"
#include "aspects/corpus.hpp"
#include "aspects/gradients.hpp"
#include "aspects/objective.hpp"
#include "aspects/sampler.hpp"

namespace aspects {

struct EpochMetrics {
  int epoch = 0;
  double train_obj = 0.0;
  double valid_obj = std::numeric_limits<double>::quiet_NaN();
  double mean_gate = 0.0;
  double learning_rate = 0.0;
};

inline nlohmann::json epoch_metrics_to_json(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch},
                   {"train_obj", m.train_obj},
                   {"mean_gate", m.mean_gate},
                   {"lr", m.learning_rate}};
  if (std::isnan(m.valid_obj)) j["valid_obj"] = nullptr;
  else j["valid_obj"] = m.valid_obj;
  return j;
}

struct TrainResult {
  AspectModel model;       // after the last completed epoch
  AspectModel best_model;  // lowest validation objective (== model without validation)
  int best_epoch = -1;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

// One sampler interface over both schemes.
struct AnySampler {
  std::optional<ReviewTripletSampler> review;
  std::optional<RatingTripletSampler> rating;

  static AnySampler make(const Corpus& corpus, std::vector<std::size_t> pool) {
    AnySampler s;
    if (corpus.manifest.mode == SupervisionMode::review_groups)
      s.review.emplace(corpus, std::move(pool));
    else
      s.rating.emplace(corpus, std::move(pool));
    return s;
  }

  TripletBatch batch(int aspect, int size, Rng& rng) {
    return review ? review->batch(aspect, size, rng) : rating->batch(aspect, size, rng);
  }
};

}  // namespace detail

// Mean gate activation over unmasked positions, all documents of a split,
// all aspects.
inline double mean_unmasked_gate(const AspectModel& model, const Corpus& corpus, Split split) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i : corpus.split_indices(split)) {
    for (int a = 0; a < model.config.n_aspects; ++a) {
      ForwardResult fr = forward_aspect(model, corpus.docs[i], a);
      for (int t = 0; t < fr.cache.true_len; ++t) sum += fr.gates[static_cast<std::size_t>(t)];
      count += static_cast<std::size_t>(fr.cache.true_len);
    }
  }
  if (count == 0) throw DataError("mean_unmasked_gate: split has no unmasked positions");
  return sum / static_cast<double>(count);
}

inline TrainResult train_model(const Corpus& corpus, EncoderConfig enc_cfg,
                               TrainConfig train_cfg,
                               const AspectModel* resume = nullptr) {
  const int n_aspects = static_cast<int>(corpus.manifest.aspect_names.size());
  if (enc_cfg.n_aspects == 0) enc_cfg.n_aspects = n_aspects;
  if (enc_cfg.n_aspects != n_aspects)
    throw ConfigError("train: config n_aspects != corpus aspect count");
  if (enc_cfg.max_len == 0) enc_cfg.max_len = corpus.max_len;
  if (enc_cfg.max_len != corpus.max_len)
    throw ConfigError("train: config max_len != corpus truncation length");
  enc_cfg.validate();
  train_cfg.lambda_l2 = enc_cfg.lambda_l2;
  train_cfg.lambda_l1 = enc_cfg.lambda_l1;
  train_cfg.validate();

  TrainResult result;
  if (resume) {
    if (resume->config.max_len != enc_cfg.max_len ||
        resume->config.filters != enc_cfg.filters ||
        resume->config.embed_dim != enc_cfg.embed_dim ||
        resume->config.layers != enc_cfg.layers ||
        resume->config.n_aspects != enc_cfg.n_aspects)
      throw ConfigError("train: resume checkpoint architecture differs from config");
    result.model = *resume;
    result.model.config = enc_cfg;
  } else {
    result.model = init_model(enc_cfg, corpus.vocab.size(), corpus.vocab.pad_id,
                              train_cfg.seed);
  }

  const auto train_pool = corpus.split_indices(Split::train);
  if (train_pool.empty()) throw DataError("train: empty train split");
  detail::AnySampler sampler = detail::AnySampler::make(corpus, train_pool);

  // Validation triplets are drawn once and reused every epoch so the curve
  // is comparable across epochs.
  std::vector<TripletBatch> valid_batches;
  {
    const auto valid_pool = corpus.split_indices(Split::valid);
    if (!valid_pool.empty()) {
      try {
        detail::AnySampler vs = detail::AnySampler::make(corpus, valid_pool);
        Rng vrng = Rng(train_cfg.seed).fork("valid-sampling");
        const int per_aspect =
            static_cast<int>(std::min<std::size_t>(valid_pool.size(), 256));
        for (int a = 0; a < n_aspects; ++a)
          valid_batches.push_back(vs.batch(a, per_aspect, vrng));
      } catch (const DataError&) {
        valid_batches.clear();  // split too thin to sample; skip validation
      }
    }
  }

  AdamState adam = AdamState::zeros_of(result.model);
  Rng train_rng = Rng(train_cfg.seed).fork("train-sampling");
  const auto batches_per_epoch =
      static_cast<int>(n_aspects *
                       ((train_pool.size() + static_cast<std::size_t>(train_cfg.batch_size) - 1) /
                        static_cast<std::size_t>(train_cfg.batch_size)));

  double best_valid = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;
  result.best_epoch = -1;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    double obj_sum = 0.0;
    double gate_sum = 0.0;
    std::size_t gate_count = 0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      const int aspect = b % n_aspects;
      TripletBatch batch = sampler.batch(aspect, train_cfg.batch_size, train_rng);
      BatchForward fwd = forward_batch(result.model, batch, train_cfg);
      if (!std::isfinite(fwd.total))
        throw NumericError("train: non-finite objective at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
      GradientSet grads = backward(result.model, batch, train_cfg, fwd);
      adam_step(result.model, grads, adam, train_cfg);
      obj_sum += fwd.total;
      gate_sum += fwd.gate_sum;
      gate_count += fwd.gate_count;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_obj = obj_sum / batches_per_epoch;
    m.mean_gate = gate_count > 0 ? gate_sum / static_cast<double>(gate_count) : 0.0;
    m.learning_rate = train_cfg.learning_rate;
    if (!valid_batches.empty()) {
      double v = 0.0;
      for (const auto& vb : valid_batches) v += forward_batch(result.model, vb, train_cfg).total;
      m.valid_obj = v / static_cast<double>(valid_batches.size());
    }
    result.metrics.push_back(m);

    if (!valid_batches.empty()) {
      if (m.valid_obj < best_valid) {
        best_valid = m.valid_obj;
        result.best_model = result.model;
        result.best_epoch = epoch;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
        if (train_cfg.patience > 0 && epochs_since_best >= train_cfg.patience) break;
      }
    }
  }

  if (result.best_epoch < 0) {
    result.best_model = result.model;
    result.best_epoch = result.metrics.empty() ? -1 : result.metrics.back().epoch;
  }
  return result;
}

}  // namespace aspects
