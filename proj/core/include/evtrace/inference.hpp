#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evtrace/corpus.hpp"
#include "evtrace/metrics.hpp"
#include "evtrace/model.hpp"
#include "evtrace/prediction.hpp"

namespace evtrace {

struct Hypothesis {
  std::vector<LabelId> labels;
  double log_prob = 0.0;
  /// Preliminary attention per step over the sentinel-padded rows.
  std::vector<Tensor> attention;
  bool finished = false;
};

struct BeamConfig {
  std::size_t width = 4;
  std::size_t max_length = 8;
};

/// Beam search over labels (BOS is never generated). Hypotheses that emit
/// EOS leave the beam; those still open at max_length get EOS appended with
/// that step's EOS log-probability. Finished hypotheses are returned ranked
/// by unnormalized log-probability.
std::vector<Hypothesis> beam_search(const TracingModel& model, std::span<const std::size_t> token_ids,
                                    std::size_t domain, const BeamConfig& config);

/// Scores one fixed label sequence (ending in EOS) under the inference-mode
/// decoder; the oracle that beam_search must agree with.
double sequence_log_prob(const TracingModel& model, std::span<const std::size_t> token_ids,
                         std::size_t domain, std::span<const LabelId> labels);

/// Token indices whose attention exceeds `threshold`.
std::vector<std::size_t> trigger_candidates(std::span<const double> token_scores, double threshold);

/// Span [start, end) for one step: the candidate run when contiguous, the
/// highest-mass contiguous run otherwise, the argmax token when empty.
std::pair<std::size_t, std::size_t> trace_span(std::span<const double> token_scores, double threshold);

/// Token part of sentinel-padded attention (drops the head and tail rows).
std::span<const double> token_scores(const Tensor& padded_attention);

/// Converts a hypothesis into typed spans; None/EOS steps yield nothing.
/// Throws std::invalid_argument unless 0 < threshold < 1.
std::vector<PredictedEvent> trace_triggers(const Hypothesis& hypothesis, double threshold,
                                           const EventSchema& schema);

inline constexpr std::array<double, 5> kThresholdGrid = {0.1, 0.2, 0.3, 0.4, 0.5};

struct ThresholdScan {
  double best = 0.1;
  std::array<double, 5> f1{};
};

/// Picks the grid threshold with the highest dev micro-F1 (ties go to the
/// smaller threshold).
ThresholdScan tune_threshold(const TracingModel& model, const Corpus& dev, MatchMode mode,
                             const BeamConfig& beam);

Prediction predict(const TracingModel& model, const Sentence& sentence, std::string_view sentence_id,
                   std::string_view domain, const BeamConfig& beam, double threshold);

std::vector<Prediction> predict_corpus(const TracingModel& model, const Corpus& corpus,
                                       const BeamConfig& beam, double threshold);

/// Domain index the model uses for `domain`; 0 for models without domains and
/// for domains it has not seen.
std::size_t inference_domain(const TracingModel& model, std::string_view domain);

}  // namespace evtrace
