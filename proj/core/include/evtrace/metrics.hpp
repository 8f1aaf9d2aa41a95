#pragma once

#include <map>
#include <string>
#include <string_view>

#include "evtrace/corpus.hpp"
#include "evtrace/prediction.hpp"

namespace evtrace {

enum class MatchMode {
  kIdentification,  // span (start, end) must match
  kClassification,  // span and type must match
};

std::string_view to_string(MatchMode mode);
MatchMode parse_match_mode(std::string_view text);

/// Micro-averaged counts and scores. F1 is 0 when P + R is 0; precision is 0
/// when nothing was predicted.
struct PRF {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PRF from_counts(std::size_t tp, std::size_t predicted, std::size_t gold);
  PRF& operator+=(const PRF& other);
};

struct TaskScores {
  PRF identification;
  PRF classification;

  const PRF& get(MatchMode mode) const {
    return mode == MatchMode::kIdentification ? identification : classification;
  }
};

struct EvalReport {
  TaskScores overall;
  std::map<std::string, TaskScores> per_domain;
  std::map<std::string, TaskScores> per_type;  // classification-keyed by gold/predicted type
};

/// Counts for one sentence. Predictions are deduplicated on the match key
/// before counting.
PRF score_sentence(const std::vector<Mention>& gold, const std::vector<PredictedEvent>& predicted,
                   MatchMode mode);

/// Micro P/R/F1 over every sentence of `gold`. Throws CorpusError when a
/// prediction names a sentence that is not in the corpus.
EvalReport score(const Corpus& gold, const PredictionSet& predictions);
PRF score(const Corpus& gold, const PredictionSet& predictions, MatchMode mode);

struct EventCountReport {
  TaskScores single;    // sentences with exactly one gold mention (1/1)
  TaskScores multiple;  // two or more (1/N)
  std::size_t single_sentences = 0;
  std::size_t multiple_sentences = 0;
};

/// 1/1 versus 1/N buckets. Predictions on event-less sentences count as false
/// positives in both buckets.
EventCountReport score_by_event_count(const Corpus& gold, const PredictionSet& predictions);

}  // namespace evtrace
