#include "evtrace/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evtrace/decoder.hpp"
#include "evtrace/encoder.hpp"
#include "evtrace/strategies.hpp"

namespace evtrace {

namespace {

struct Live {
  Hypothesis hyp;
  DecoderState state;
};

Var encode_features(Tape& tape, const TracingModel& model, std::span<const std::size_t> token_ids,
                    std::size_t domain) {
  EncodedSentence enc = encode(tape, model.encoder(), token_ids);
  return transform_features(tape, model, enc.rows, domain);
}

double log_of(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

std::size_t inference_domain(const TracingModel& model, std::string_view domain) {
  const auto& domains = model.config().domains;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == domain) return i;
  }
  return 0;
}

std::vector<Hypothesis> beam_search(const TracingModel& model, std::span<const std::size_t> token_ids,
                                    std::size_t domain, const BeamConfig& config) {
  if (config.width == 0) throw std::invalid_argument("beam_search: width must be at least 1");
  if (config.max_length < 2) throw std::invalid_argument("beam_search: max_length must be at least 2");
  const EventSchema& schema = model.schema();
  const LabelId eos = schema.eos_id();
  const LabelId bos = schema.bos_id();

  Tape tape;
  Var features = encode_features(tape, model, token_ids, domain);
  std::vector<Live> beam{{Hypothesis{}, initial_decoder_state(tape, model)}};
  std::vector<Hypothesis> finished;

  for (std::size_t step = 1; step <= config.max_length && !beam.empty(); ++step) {
    const bool last = step == config.max_length;
    struct Candidate {
      std::size_t parent;
      LabelId label;
      double score;
    };
    std::vector<Candidate> candidates;
    std::vector<StepResult> results;
    results.reserve(beam.size());
    for (std::size_t b = 0; b < beam.size(); ++b) {
      results.push_back(decode_step(tape, model, features, beam[b].state, std::nullopt, 0.0, nullptr));
      const Tensor& probs = results.back().probs.value();
      for (LabelId l = 0; l < probs.size(); ++l) {
        if (l == bos || (last && l != eos)) continue;
        candidates.push_back({b, l, beam[b].hyp.log_prob + log_of(probs[l])});
      }
    }
    // Ties resolve toward the earlier parent, then the smaller label id.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
    if (candidates.size() > config.width) candidates.resize(config.width);

    std::vector<Live> next;
    for (const auto& c : candidates) {
      Hypothesis h = beam[c.parent].hyp;
      h.labels.push_back(c.label);
      h.log_prob = c.score;
      h.attention.push_back(results[c.parent].attention.value());
      if (c.label == eos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        DecoderState st = results[c.parent].state;
        st.prev_label = c.label;
        next.push_back({std::move(h), st});
      }
    }
    beam = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& x, const Hypothesis& y) { return x.log_prob > y.log_prob; });
  return finished;
}

double sequence_log_prob(const TracingModel& model, std::span<const std::size_t> token_ids,
                         std::size_t domain, std::span<const LabelId> labels) {
  Tape tape;
  Var features = encode_features(tape, model, token_ids, domain);
  DecoderState state = initial_decoder_state(tape, model);
  double total = 0.0;
  for (LabelId l : labels) {
    StepResult r = decode_step(tape, model, features, state, std::nullopt, 0.0, nullptr);
    total += log_of(r.probs.value()[l]);
    state = r.state;
    state.prev_label = l;
  }
  return total;
}

std::vector<std::size_t> trigger_candidates(std::span<const double> token_scores, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < token_scores.size(); ++i) {
    if (token_scores[i] > threshold) out.push_back(i);
  }
  return out;
}

std::pair<std::size_t, std::size_t> trace_span(std::span<const double> token_scores, double threshold) {
  if (token_scores.empty()) throw std::invalid_argument("trace_span: no token scores");
  const auto candidates = trigger_candidates(token_scores, threshold);
  if (candidates.empty()) {
    const auto best = static_cast<std::size_t>(
        std::max_element(token_scores.begin(), token_scores.end()) - token_scores.begin());
    return {best, best + 1};
  }
  // Maximal runs of consecutive candidates; keep the one with most mass.
  std::pair<std::size_t, std::size_t> best_run{candidates[0], candidates[0] + 1};
  double best_mass = -1.0;
  std::size_t run_start = 0;
  for (std::size_t k = 1; k <= candidates.size(); ++k) {
    if (k < candidates.size() && candidates[k] == candidates[k - 1] + 1) continue;
    double mass = 0.0;
    for (std::size_t j = run_start; j < k; ++j) mass += token_scores[candidates[j]];
    if (mass > best_mass) {
      best_mass = mass;
      best_run = {candidates[run_start], candidates[k - 1] + 1};
    }
    run_start = k;
  }
  return best_run;
}

std::span<const double> token_scores(const Tensor& padded_attention) {
  if (padded_attention.size() < 3) throw std::invalid_argument("attention covers no tokens");
  return padded_attention.data().subspan(1, padded_attention.size() - 2);
}

std::vector<PredictedEvent> trace_triggers(const Hypothesis& hypothesis, double threshold,
                                           const EventSchema& schema) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("trace_triggers: threshold must lie in (0, 1)");
  }
  if (hypothesis.attention.size() != hypothesis.labels.size()) {
    throw std::invalid_argument("trace_triggers: hypothesis lacks per-step attention");
  }
  std::vector<PredictedEvent> events;
  for (std::size_t t = 0; t < hypothesis.labels.size(); ++t) {
    const LabelId l = hypothesis.labels[t];
    if (!schema.is_event(l)) continue;
    // Word-level scores equal token scores here: tokens are atomic, so there
    // are no sub-tokens to sum.
    const auto [start, end] = trace_span(token_scores(hypothesis.attention[t]), threshold);
    events.push_back({std::string(schema.name(l)), start, end});
  }
  return events;
}

Prediction predict(const TracingModel& model, const Sentence& sentence, std::string_view sentence_id,
                   std::string_view domain, const BeamConfig& beam, double threshold) {
  Prediction p;
  p.sentence_id = sentence_id;
  const auto ids = model.vocab().encode(sentence.tokens);
  const auto hyps = beam_search(model, ids, inference_domain(model, domain), beam);
  if (!hyps.empty()) p.events = trace_triggers(hyps.front(), threshold, model.schema());
  return p;
}

std::vector<Prediction> predict_corpus(const TracingModel& model, const Corpus& corpus,
                                       const BeamConfig& beam, double threshold) {
  std::vector<Prediction> out;
  for (const auto& doc : corpus.documents) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      out.push_back(predict(model, doc.sentences[i], sentence_id(doc.id, i), doc.domain, beam, threshold));
    }
  }
  return out;
}

ThresholdScan tune_threshold(const TracingModel& model, const Corpus& dev, MatchMode mode,
                             const BeamConfig& beam) {
  if (dev.documents.empty()) throw std::invalid_argument("tune_threshold: empty dev split");
  // Decode once; only the tracing step depends on the threshold.
  std::vector<std::pair<std::string, Hypothesis>> decoded;
  for (const auto& doc : dev.documents) {
    const std::size_t domain = inference_domain(model, doc.domain);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const auto ids = model.vocab().encode(doc.sentences[i].tokens);
      auto hyps = beam_search(model, ids, domain, beam);
      if (!hyps.empty()) decoded.emplace_back(sentence_id(doc.id, i), std::move(hyps.front()));
    }
  }
  ThresholdScan scan;
  double best_f1 = -1.0;
  for (std::size_t g = 0; g < kThresholdGrid.size(); ++g) {
    PredictionSet set;
    for (const auto& [id, hyp] : decoded) set[id] = trace_triggers(hyp, kThresholdGrid[g], model.schema());
    scan.f1[g] = score(dev, set, mode).f1;
    if (scan.f1[g] > best_f1) {
      best_f1 = scan.f1[g];
      scan.best = kThresholdGrid[g];
    }
  }
  return scan;
}

}  // namespace evtrace
