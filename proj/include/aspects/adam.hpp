// Adam optimizer over the model's canonical parameter list.
#pragma once

#include <cmath>
#include <vector>

#include "aspects/model.hpp"
#include "aspects/objective.hpp"

namespace aspects {

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long long step = 0;

  static AdamState zeros_of(const AspectModel& model) {
    AdamState s;
    for (const auto& p : parameters(model)) {
      s.first_moment.emplace_back(p.tensor->shape);
      s.second_moment.emplace_back(p.tensor->shape);
    }
    return s;
  }
};

inline void adam_step(AspectModel& model, const GradientSet& grads, AdamState& state,
                      const TrainConfig& cfg) {
  auto params = parameters(model);
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ConfigError("adam_step: gradient/state shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(*params[i].tensor))
      throw ConfigError("adam_step: shape mismatch in " + params[i].name);
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient in " + params[i].name);
  }

  state.step += 1;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].tensor;
    const Tensor& g = grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g.data[j];
      v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g.data[j] * g.data[j];
      const double m_hat = m.data[j] / bias1;
      const double v_hat = v.data[j] / bias2;
      theta.data[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }

  // The pad embedding row never moves.
  Tensor& emb = model.embedding;
  double* pad_row = emb.row(static_cast<std::size_t>(model.pad_id));
  for (std::size_t j = 0; j < emb.shape[1]; ++j) pad_row[j] = 0.0;
}

}  // namespace aspects
