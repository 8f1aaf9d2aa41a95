#pragma once

#include <vector>

#include "evtrace/autodiff.hpp"

namespace evtrace {

enum class UpdateRule { kSgd, kAdam };

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global L2-norm clip applied to the gradients before the update; 0 disables.
  double clip_norm = 0.0;
};

/// Applies accumulated gradients to trainable parameters of a store. Moment
/// estimates are kept per parameter index, so the optimizer must stay bound
/// to one store.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void step(ParameterStore& params);
  long steps_taken() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  long steps_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

}  // namespace evtrace
