#include <cmath>

#include "hdnet/error.hpp"
#include "hdnet/trainer.hpp"

namespace hdnet {

void TrainerConfig::validate() const {
  if (!(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0)) {
    throw ContractError("trainer: require 0 < beta1 < beta2 < 1");
  }
  if (!(learning_rate > 0.0)) throw ContractError("trainer: learning_rate must be positive");
  if (epsilon < 0.0) throw ContractError("trainer: epsilon must be non-negative");
  if (epochs == 0) throw ContractError("trainer: epochs must be positive");
  if (!(decay_epochs[0] < decay_epochs[1] && decay_epochs[1] < epochs)) {
    throw ContractError("trainer: decay epochs must be ascending and below epochs");
  }
  if (batch_size == 0) throw ContractError("trainer: batch_size must be positive");
}

TrainerConfig full_scale_schedule() {
  TrainerConfig cfg;
  cfg.learning_rate = 0.001;
  cfg.epochs = 120;
  cfg.decay_epochs = {100, 110};
  cfg.decay_factor = 0.1;
  cfg.batch_size = 12;
  return cfg;
}

double lr_at_epoch(const TrainerConfig& cfg, std::size_t epoch) {
  double lr = cfg.learning_rate;
  if (epoch >= cfg.decay_epochs[0]) lr *= cfg.decay_factor;
  if (epoch >= cfg.decay_epochs[1]) lr *= cfg.decay_factor;
  return lr;
}

AdamState AdamState::for_params(const GeneratorParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.entries()) {
    s.first_moment.emplace_back(name, std::vector<double>(t.numel(), 0.0));
    s.second_moment.emplace_back(name, std::vector<double>(t.numel(), 0.0));
  }
  return s;
}

void adam_step(GeneratorParams& params, AdamState& state, const TrainerConfig& cfg, double lr_now) {
  auto& entries = params.entries();
  if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size()) {
    throw ContractError("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, t] = entries[i];
    if (!t.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
    if (state.first_moment[i].first != name || state.first_moment[i].second.size() != t.numel()) {
      throw ContractError("adam_step: optimizer state mismatch at '" + name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& param = entries[i].second;
    const auto& g = param.grad();
    auto& m = state.first_moment[i].second;
    auto& v = state.second_moment[i].second;
    auto data = param.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      const double denom = std::sqrt(v_hat) + cfg.epsilon;
      if (denom > 0.0) data[j] -= lr_now * m_hat / denom;
    }
    param.zero_grad();
  }
}

}  // namespace hdnet
