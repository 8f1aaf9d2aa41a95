#pragma once

// Unsupervised domain adaptation: labeled source, unlabeled target, domain
// classifier behind gradient reversal.

#include <string_view>
#include <vector>

#include "evtrace/inference.hpp"
#include "evtrace/metrics.hpp"
#include "evtrace/model.hpp"
#include "evtrace/strategies.hpp"
#include "evtrace/trainer.hpp"

namespace evtrace {

struct UdaConfig {
  EventSchema schema = EventSchema::food_safety();
  ModelConfig model;
  TrainConfig train;
  /// Strategy must be ADA with domains {source, target}.
  StrategyConfig strategy;
  BeamConfig beam;
  MatchMode tune_mode = MatchMode::kClassification;
};

struct UdaEpoch {
  std::size_t epoch = 0;
  LossBreakdown train;
  /// Domain-classifier accuracy on held-out (dev) features of both domains.
  double domain_accuracy = 0.0;
};

struct UdaResult {
  TracingModel model;
  double threshold = 0.1;
  EvalReport in_domain;      // source test split
  EvalReport out_of_domain;  // target test split
  std::vector<UdaEpoch> trend;
  TrainResult log;
};

/// Throws std::logic_error when a `target` document in `train` carries
/// labels.
void check_no_target_labels(const Corpus& train, std::string_view target);

/// Share of sentences whose pooled encoder features the domain classifier
/// assigns to their own domain.
double domain_classifier_accuracy(const TracingModel& model, const Corpus& held_out);

UdaResult run_uda(const CorpusSplits& splits, const UdaConfig& config);

}  // namespace evtrace
