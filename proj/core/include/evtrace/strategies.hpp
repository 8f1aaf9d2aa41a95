#pragma once

// Multi-domain training strategies over encoder features.
//
//   SD    one model per domain: data restricted to a single domain tag
//   PD    pooled data, domain tags ignored
//   PDMT  pooled data plus an auxiliary domain-classification loss
//   MDSP  pooled data; features = [shared(h) ; private_domain(h)] per row
//   ADA   labeled source + unlabeled target; the domain classifier sees
//         encoder features through a gradient-reversal layer

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evtrace/autodiff.hpp"
#include "evtrace/corpus.hpp"
#include "evtrace/encoder.hpp"
#include "evtrace/model.hpp"

namespace evtrace {

enum class Strategy { kSD, kPD, kPDMT, kMDSP, kADA };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct StrategyConfig {
  Strategy strategy = Strategy::kPD;
  /// SD: the single domain kept. ADA: [source, target].
  std::vector<std::string> domains;
  double domain_loss_weight = 0.1;  // lambda_dom
  double reversal_coefficient = 1.0;  // lambda_grl
  std::size_t shared_dim = 16;
  std::size_t private_dim = 16;
  /// MDSP combination; summation requires shared_dim == private_dim.
  bool sum_shared_private = false;
};

/// What a strategy changes about a training run.
struct TrainingPlan {
  CorpusSplits data;
  /// Domain tags the model must know (private transforms / classifier).
  std::vector<std::string> model_domains;
  FeatureMode feature_mode = FeatureMode::kIdentity;
  bool domain_classifier = false;
  double domain_loss_weight = 0.0;
  /// Set for ADA: the domain classifier sees features through gradient
  /// reversal with this coefficient.
  std::optional<double> reversal_coefficient;
  std::size_t shared_dim = 16;
  std::size_t private_dim = 16;
};

/// Validates the configuration against the corpus and derives the plan.
/// For ADA the target domain's training documents are stripped of labels.
TrainingPlan apply_strategy(const CorpusSplits& splits, const StrategyConfig& config);

/// Copies `model_config` with the plan's feature and head settings.
ModelConfig configure_model(ModelConfig model_config, const TrainingPlan& plan);

/// Row-wise feature transform for the decoder; identity unless the model was
/// built with shared/private heads.
Var transform_features(Tape& tape, const TracingModel& model, Var rows, std::size_t domain);

/// Mean of the non-sentinel rows of an encoded sentence.
Var pooled_features(Tape& tape, const EncodedSentence& encoded);

/// Cross-entropy of the domain classifier on pooled features. With a
/// reversal coefficient the features pass through gradient_reversal().
Var domain_aux_loss(Tape& tape, const TracingModel& model, Var pooled, std::size_t domain,
                    std::optional<double> reversal_coefficient);

/// Predicted domain index for pooled features (no gradient use).
std::size_t classify_domain(Tape& tape, const TracingModel& model, Var pooled);

/// Removes all mentions and marks documents unlabeled.
Corpus strip_labels(const Corpus& corpus);

}  // namespace evtrace
