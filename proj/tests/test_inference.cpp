#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evtrace/encoder.hpp"
#include "evtrace/inference.hpp"
#include "evtrace/synth.hpp"
#include "model_checks.hpp"
#include "test_util.hpp"

using namespace evtrace;
using evtrace::testing::tiny_model;

namespace {

using Span = std::pair<std::size_t, std::size_t>;

std::vector<LabelId> greedy(const TracingModel& model, std::span<const std::size_t> ids, std::size_t max_length) {
  const EventSchema& schema = model.schema();
  Tape tape;
  Var features = encode(tape, model.encoder(), ids).rows;
  DecoderState state = initial_decoder_state(tape, model);
  std::vector<LabelId> out;
  for (std::size_t step = 1; step <= max_length; ++step) {
    StepResult r = decode_step(tape, model, features, state, std::nullopt, 0.0, nullptr);
    LabelId best = schema.eos_id();
    if (step < max_length) {
      double p = -1.0;
      for (LabelId l = 0; l < schema.label_count(); ++l) {
        if (l != schema.bos_id() && r.probs.value()[l] > p) {
          p = r.probs.value()[l];
          best = l;
        }
      }
    }
    out.push_back(best);
    if (best == schema.eos_id()) break;
    state = r.state;
    state.prev_label = best;
  }
  return out;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("beam with exhaustive width equals enumeration") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CHECK(evtrace::testing::beam_matches_enumeration(seed));
  }
}

TEST_CASE("width one is greedy decoding") {
  const EventSchema schema({"A", "B", "C"});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TracingModel m = tiny_model(schema, 9, 4, seed);
    for (double& v : m.decoder().output->value.data()) v *= 3.0;
    const std::vector<std::size_t> ids{3, 4, 5, 8};
    const auto hyps = beam_search(m, ids, 0, {1, 6});
    REQUIRE(hyps.size() == 1);
    CHECK(hyps[0].labels == greedy(m, ids, 6));
  }
}

TEST_CASE("hypotheses end with EOS and carry attention") {
  const EventSchema schema({"A", "B"});
  TracingModel m = tiny_model(schema, 9, 4, 3);
  const std::vector<std::size_t> ids{3, 4, 5};
  const auto hyps = beam_search(m, ids, 0, {4, 5});
  CHECK(!hyps.empty());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    CHECK(hyps[i].finished);
    CHECK(hyps[i].labels.back() == schema.eos_id());
    CHECK(hyps[i].attention.size() == hyps[i].labels.size());
    CHECK(hyps[i].attention[0].size() == ids.size() + 2);
    for (LabelId l : hyps[i].labels) CHECK(l != schema.bos_id());
    CHECK(hyps[i].log_prob == doctest::Approx(sequence_log_prob(m, ids, 0, hyps[i].labels)).epsilon(1e-12));
    if (i > 0) CHECK(hyps[i - 1].log_prob >= hyps[i].log_prob);
  }
  CHECK_THROWS_AS(beam_search(m, ids, 0, {0, 5}), std::invalid_argument);
  CHECK_THROWS_AS(beam_search(m, ids, 0, {2, 1}), std::invalid_argument);
}

TEST_CASE("trace spans") {
  const std::vector<double> a{0.05, 0.6, 0.3, 0.05};
  CHECK(trace_span(a, 0.5) == Span{1, 2});
  CHECK(trace_span(a, 0.2) == Span{1, 3});
  const std::vector<double> b{0.4, 0.05, 0.45};
  CHECK(trigger_candidates(b, 0.3) == std::vector<std::size_t>{0, 2});
  CHECK(trace_span(b, 0.3) == Span{2, 3});
  // Empty candidate set falls back to the argmax token.
  CHECK(trace_span(std::vector<double>{0.2, 0.3, 0.25, 0.25}, 0.4) == Span{1, 2});
}

TEST_CASE("candidate sets shrink as the threshold rises") {
  Rng rng = make_substream(31, "tau");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(8);
    double total = 0.0;
    for (double& v : w) total += (v = uniform(rng, 0.0, 1.0));
    for (double& v : w) v /= total;
    for (std::size_t g = 1; g < kThresholdGrid.size(); ++g) {
      const auto lo = trigger_candidates(w, kThresholdGrid[g - 1]);
      const auto hi = trigger_candidates(w, kThresholdGrid[g]);
      CHECK(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
    }
  }
}

TEST_CASE("traced triggers never cover a sentinel") {
  const EventSchema schema({"A", "B"});
  Hypothesis h;
  h.labels = {0, 1, schema.eos_id()};
  // Sentinel rows carry most of the mass.
  h.attention = {Tensor::vector({0.7, 0.1, 0.05, 0.15}), Tensor::vector({0.2, 0.05, 0.05, 0.7}),
                 Tensor::vector({0.1, 0.1, 0.1, 0.7})};
  const auto events = trace_triggers(h, 0.1, schema);
  REQUIRE(events.size() == 2);
  for (const auto& e : events) {
    CHECK(e.end <= 2);
    CHECK(e.start < e.end);
  }
  CHECK(events[0].type == "A");
  CHECK(events[0].start == 0);
  CHECK_THROWS_AS(trace_triggers(h, 0.0, schema), std::invalid_argument);
  CHECK_THROWS_AS(trace_triggers(h, 1.0, schema), std::invalid_argument);

  Hypothesis none;
  none.labels = {schema.none_id(), schema.eos_id()};
  none.attention = {Tensor::vector({0.1, 0.8, 0.1}), Tensor::vector({0.1, 0.8, 0.1})};
  CHECK(trace_triggers(none, 0.3, schema).empty());
}

TEST_CASE("threshold tuning stays on the grid, is deterministic, and breaks ties low") {
  const EventSchema fs = EventSchema::food_safety();
  const SyntheticCorpus syn = generate_synthetic_corpus(4, default_synth_spec(fs, 4), fs);
  ModelConfig cfg;
  cfg.embedding_dim = cfg.hidden_dim = cfg.decoder_dim = 4;
  const TracingModel m(cfg, fs, Vocabulary::from_corpus(syn.corpus), 4);
  const ThresholdScan a = tune_threshold(m, syn.corpus, MatchMode::kClassification, {2, 4});
  const ThresholdScan b = tune_threshold(m, syn.corpus, MatchMode::kClassification, {2, 4});
  CHECK(std::find(kThresholdGrid.begin(), kThresholdGrid.end(), a.best) != kThresholdGrid.end());
  CHECK(a.best == b.best);
  CHECK(a.f1 == b.f1);
  bool constant = true;
  for (double f : a.f1) constant &= f == a.f1[0];
  if (constant) CHECK(a.best == 0.1);
  const std::size_t best = static_cast<std::size_t>(std::find(kThresholdGrid.begin(), kThresholdGrid.end(), a.best) -
                                                    kThresholdGrid.begin());
  for (std::size_t g = 0; g < best; ++g) CHECK(a.f1[g] < a.f1[best]);
  for (double f : a.f1) CHECK(f <= a.f1[best]);
}

TEST_CASE("predictions stay inside the sentence") {
  const EventSchema fs = EventSchema::food_safety();
  const SyntheticCorpus syn = generate_synthetic_corpus(5, default_synth_spec(fs, 3), fs);
  ModelConfig cfg;
  cfg.embedding_dim = cfg.hidden_dim = cfg.decoder_dim = 4;
  const TracingModel m(cfg, fs, Vocabulary::from_corpus(syn.corpus), 5);
  const auto preds = predict_corpus(m, syn.corpus, {3, 6}, 0.3);
  std::size_t k = 0;
  for (const auto& d : syn.corpus.documents) {
    for (std::size_t i = 0; i < d.sentences.size(); ++i, ++k) {
      CHECK(preds[k].sentence_id == sentence_id(d.id, i));
      CHECK(preds[k].events.size() <= 5);
      for (const auto& e : preds[k].events) {
        CHECK(e.start < e.end);
        CHECK(e.end <= d.sentences[i].tokens.size());
      }
    }
  }
  CHECK_NOTHROW(score(syn.corpus, to_prediction_set(preds)));
}

TEST_CASE("prediction file round trip") {
  const std::vector<Prediction> preds{{"a#0", {{"T1", 0, 2}, {"T2", 3, 4}}}, {"a#1", {}}};
  evtrace::testing::ScratchDir dir("preds");
  save_predictions(dir.path() / "p.jsonl", preds);
  CHECK(load_predictions(dir.path() / "p.jsonl") == preds);
}

}  // TEST_SUITE
