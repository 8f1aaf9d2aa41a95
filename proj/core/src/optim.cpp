#include "evtrace/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace evtrace {

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (config_.learning_rate < 0.0) {
    throw std::invalid_argument("optimizer: negative learning rate");
  }
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0) {
    throw std::invalid_argument("optimizer: Adam betas must lie in [0, 1)");
  }
}

void Optimizer::step(ParameterStore& params) {
  if (first_moment_.empty() && config_.rule == UpdateRule::kAdam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_moment_.push_back(Tensor::zeros_like(params[i].value));
      second_moment_.push_back(Tensor::zeros_like(params[i].value));
    }
  }
  if (config_.rule == UpdateRule::kAdam && first_moment_.size() != params.size()) {
    throw std::logic_error("optimizer: bound to a store of different size");
  }
  ++steps_;

  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      for (double g : params[i].grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    if (config_.rule == UpdateRule::kSgd) {
      for (std::size_t j = 0; j < p.value.size(); ++j) p.value[j] -= lr * clip * p.grad[j];
      continue;
    }
    Tensor& m = first_moment_[i];
    Tensor& v = second_moment_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = clip * p.grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace evtrace
