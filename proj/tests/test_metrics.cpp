#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "evtrace/analysis.hpp"
#include "evtrace/metrics.hpp"
#include "evtrace/random.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"

using namespace evtrace;
using evtrace::testing::make_sentence;
using namespace evtrace::testing;

namespace {

Corpus one_sentence_corpus(std::vector<Mention> gold, std::size_t length = 12) {
  Corpus c;
  c.documents.push_back({"d", "review", {make_sentence(length, std::move(gold))}});
  return c;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("hand-counted example") {
  const Corpus gold = one_sentence_corpus({{0, 2, "T1"}, {5, 7, "T2"}});
  const PredictionSet pred{{"d#0", {{"T1", 0, 2}, {"T3", 5, 7}, {"T1", 9, 10}}}};
  const EvalReport r = score(gold, pred);
  CHECK(r.overall.identification.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.overall.identification.recall == 1.0);
  CHECK(r.overall.identification.f1 == doctest::Approx(0.8));
  CHECK(r.overall.classification.precision == doctest::Approx(1.0 / 3.0));
  CHECK(r.overall.classification.recall == 0.5);
  CHECK(r.overall.classification.f1 == doctest::Approx(0.4));
}

TEST_CASE("perfect and empty predictions") {
  const Corpus gold = one_sentence_corpus({{0, 2, "T1"}, {5, 7, "T2"}});
  const PredictionSet perfect{{"d#0", {{"T2", 5, 7}, {"T1", 0, 2}}}};
  const EvalReport r = score(gold, perfect);
  CHECK(r.overall.identification.f1 == 1.0);
  CHECK(r.overall.classification.f1 == 1.0);
  const EvalReport e = score(gold, {});
  CHECK(e.overall.classification.precision == 0.0);
  CHECK(e.overall.classification.recall == 0.0);
  CHECK(e.overall.classification.f1 == 0.0);
}

TEST_CASE("duplicates count once and unknown ids are rejected") {
  const Corpus gold = one_sentence_corpus({{0, 2, "T1"}});
  const PredictionSet dup{{"d#0", {{"T1", 0, 2}, {"T1", 0, 2}, {"T1", 0, 2}}}};
  CHECK(score(gold, dup, MatchMode::kClassification).precision == 1.0);
  CHECK_THROWS_AS(score(gold, PredictionSet{{"nope#0", {}}}), CorpusError);
}

TEST_CASE("agrees with a brute-force matcher on random corpora") {
  Rng rng = make_substream(21, "metrics");
  for (int trial = 0; trial < 200; ++trial) {
    const RandomCase rc = random_case(rng);
    for (MatchMode mode : {MatchMode::kIdentification, MatchMode::kClassification}) {
      const Counts c = brute_force(rc.gold, rc.predictions, mode);
      const PRF r = score(rc.gold, rc.predictions, mode);
      CHECK(r.true_positives == c.tp);
      CHECK(r.predicted == c.predicted);
      CHECK(r.gold == c.gold);
      const double p = c.predicted ? double(c.tp) / double(c.predicted) : 0.0;
      const double rec = c.gold ? double(c.tp) / double(c.gold) : 0.0;
      CHECK(r.precision == p);
      CHECK(r.recall == rec);
      CHECK(r.f1 == (p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0));
      CHECK(r.f1 >= 0.0);
      CHECK(r.f1 <= 1.0);
    }
  }
}

TEST_CASE("invariant to prediction and sentence order") {
  Rng rng = make_substream(22, "order");
  for (int trial = 0; trial < 50; ++trial) {
    RandomCase rc = random_case(rng);
    const PRF before = score(rc.gold, rc.predictions, MatchMode::kClassification);
    for (auto& [id, events] : rc.predictions) std::reverse(events.begin(), events.end());
    // Reversing the sentences requires renaming ids consistently.
    Corpus reversed;
    Document d{"doc", "review", {}};
    PredictionSet renamed;
    const auto& sents = rc.gold.documents[0].sentences;
    for (std::size_t i = 0; i < sents.size(); ++i) {
      const std::size_t src = sents.size() - 1 - i;
      d.sentences.push_back(sents[src]);
      if (auto it = rc.predictions.find(sentence_id("doc", src)); it != rc.predictions.end()) {
        renamed[sentence_id("doc", i)] = it->second;
      }
    }
    reversed.documents.push_back(d);
    const PRF after = score(reversed, renamed, MatchMode::kClassification);
    CHECK(after.true_positives == before.true_positives);
    CHECK(after.predicted == before.predicted);
    CHECK(after.f1 == before.f1);
  }
}

TEST_CASE("per-domain and per-type breakdowns") {
  Corpus gold;
  gold.documents.push_back({"a", "review", {make_sentence(5, {{0, 1, "T1"}})}});
  gold.documents.push_back({"b", "phone_conv", {make_sentence(5, {{2, 3, "T2"}})}});
  const PredictionSet pred{{"a#0", {{"T1", 0, 1}}}, {"b#0", {{"T1", 2, 3}}}};
  const EvalReport r = score(gold, pred);
  CHECK(r.per_domain.at("review").classification.f1 == 1.0);
  CHECK(r.per_domain.at("phone_conv").classification.f1 == 0.0);
  CHECK(r.per_domain.at("phone_conv").identification.f1 == 1.0);
  CHECK(r.per_type.at("T2").classification.recall == 0.0);
}

TEST_CASE("event-count buckets") {
  Corpus singles;
  singles.documents.push_back({"s", "review", {make_sentence(4, {{0, 1, "T1"}}), make_sentence(4, {{2, 3, "T2"}})}});
  const PredictionSet sp{{"s#0", {{"T1", 0, 1}}}, {"s#1", {{"T1", 2, 3}}}};
  const EventCountReport only = score_by_event_count(singles, sp);
  CHECK(only.multiple.classification.gold == 0);
  CHECK(only.multiple.classification.predicted == 0);
  CHECK(only.single_sentences == 2);
  CHECK(only.single.classification.f1 == score(singles, sp, MatchMode::kClassification).f1);

  Corpus mixed;
  mixed.documents.push_back({"m", "review",
                             {make_sentence(6, {{0, 1, "T1"}}),
                              make_sentence(6, {{0, 1, "T1"}, {2, 3, "T2"}, {4, 5, "T3"}}),
                              make_sentence(6, {})}});
  const PredictionSet perfect{{"m#0", {{"T1", 0, 1}}}, {"m#1", {{"T1", 0, 1}, {"T2", 2, 3}, {"T3", 4, 5}}}};
  const EventCountReport both = score_by_event_count(mixed, perfect);
  CHECK(both.single.classification.f1 == 1.0);
  CHECK(both.multiple.classification.f1 == 1.0);

  // Hand count: 1/1 has tp 1 of 3 predictions (one from the event-less
  // sentence) and 1 gold; 1/N has tp 1 of 2 predictions and 3 gold.
  const PredictionSet noisy{{"m#0", {{"T1", 0, 1}, {"T2", 3, 4}}}, {"m#1", {{"T2", 2, 3}}}, {"m#2", {{"T1", 1, 2}}}};
  const EventCountReport hand = score_by_event_count(mixed, noisy);
  CHECK(hand.single.classification.precision == doctest::Approx(1.0 / 3.0));
  CHECK(hand.single.classification.recall == 1.0);
  CHECK(hand.single.classification.f1 == doctest::Approx(0.5));
  CHECK(hand.multiple.classification.precision == doctest::Approx(0.5));
  CHECK(hand.multiple.classification.recall == doctest::Approx(1.0 / 3.0));
  CHECK(hand.multiple.classification.f1 == doctest::Approx(0.4));
}

}  // TEST_SUITE

TEST_SUITE("analysis") {

namespace {

std::vector<std::string> expand(std::initializer_list<std::pair<const char*, int>> runs) {
  std::vector<std::string> out;
  for (const auto& [label, n] : runs) out.insert(out.end(), static_cast<std::size_t>(n), label);
  return out;
}

}  // namespace

TEST_CASE("kappa on the joint-count table") {
  // (A,A)=20, (A,B)=5, (B,A)=10, (B,B)=15.
  const auto a = expand({{"A", 20}, {"A", 5}, {"B", 10}, {"B", 15}});
  const auto b = expand({{"A", 20}, {"B", 5}, {"A", 10}, {"B", 15}});
  CHECK(cohen_kappa(a, b) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(cohen_kappa(a, a) == 1.0);
  const std::vector<std::string> same(10, "A");
  CHECK_THROWS_AS(cohen_kappa(same, same), std::domain_error);
  CHECK_THROWS_AS(cohen_kappa(a, std::vector<std::string>(3, "A")), std::invalid_argument);
}

TEST_CASE("kappa of independent labelings is near zero") {
  Rng rng = make_substream(23, "kappa");
  const std::vector<std::string> labels{"x", "y", "z"};
  std::vector<std::string> a, b;
  for (int i = 0; i < 10000; ++i) {
    a.push_back(labels[uniform_index(rng, 3)]);
    b.push_back(labels[uniform_index(rng, 3)]);
  }
  const double k = cohen_kappa(a, b);
  CHECK(std::abs(k) < 0.05);
  CHECK(k >= -1.0);
}

TEST_CASE("average wasserstein") {
  const EventSchema two({"T1", "T2"});
  Corpus extreme;
  extreme.documents.push_back({"a", "review", {make_sentence(3, {{0, 1, "T1"}})}});
  extreme.documents.push_back({"b", "phone_conv", {make_sentence(3, {{0, 1, "T2"}})}});
  const HeterogeneityReport r = heterogeneity(extreme, two);
  CHECK(r.pairwise[0][1] == 1.0);
  CHECK(r.average_wasserstein == 0.5);

  Corpus equal;
  equal.documents.push_back({"a", "review", {make_sentence(3, {{0, 1, "T1"}, {1, 2, "T2"}})}});
  equal.documents.push_back({"b", "phone_conv", {make_sentence(3, {{0, 1, "T2"}, {2, 3, "T1"}})}});
  equal.documents.push_back({"c", "text_conv", {make_sentence(3, {{0, 1, "T2"}, {2, 3, "T1"}})}});
  CHECK(average_wasserstein(equal, two) == 0.0);
  for (const auto& p : heterogeneity(equal, two).distributions) {
    CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-12);
  }

  Corpus single;
  single.documents.push_back({"a", "review", {make_sentence(3, {{0, 1, "T1"}})}});
  CHECK_THROWS_AS(heterogeneity(single, two), CorpusError);
  Corpus empty_domain = extreme;
  empty_domain.documents.push_back({"c", "text_conv", {make_sentence(3, {})}});
  CHECK_THROWS_AS(heterogeneity(empty_domain, two), CorpusError);
}

TEST_CASE("wasserstein metric properties") {
  Rng rng = make_substream(24, "w1");
  auto random_dist = [&] {
    std::vector<double> p(6);
    double total = 0.0;
    for (double& v : p) total += (v = uniform(rng, 0.0, 1.0));
    for (double& v : p) v /= total;
    return p;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_dist(), q = random_dist(), r = random_dist();
    CHECK(wasserstein_1d(p, q) >= 0.0);
    CHECK(wasserstein_1d(p, q) == doctest::Approx(wasserstein_1d(q, p)).epsilon(1e-12));
    CHECK(wasserstein_1d(p, p) == 0.0);
    CHECK(wasserstein_1d(p, r) <= wasserstein_1d(p, q) + wasserstein_1d(q, r) + 1e-12);
  }
}

TEST_CASE("corpus statistics") {
  Corpus c;
  // review: 2 sentences, 3 mentions; phone_conv: 2 sentences, 1 mention.
  c.documents.push_back({"a", "review", {make_sentence(4, {{0, 1, "T1"}, {1, 3, "T2"}}), make_sentence(6, {{0, 5, "T1"}})}});
  c.documents.push_back({"b", "phone_conv", {make_sentence(8, {{2, 6, "T1"}}), make_sentence(10, {})}});
  const CorpusStats st = corpus_stats(c);
  CHECK(st.trigger_length_histogram == std::array<std::size_t, 3>{2, 1, 1});
  CHECK(st.evented_sentences == 3);
  CHECK(st.multi_event_sentences == 1);
  CHECK(st.multi_event_proportion == doctest::Approx(1.0 / 3.0));
  CHECK(st.multi_event_proportion_all == doctest::Approx(0.25));
  CHECK(st.event_density.at("review") == 1.5);
  CHECK(st.event_density.at("phone_conv") == 0.5);
  CHECK(st.event_density_std == doctest::Approx(0.5));  // population std of {1.5, 0.5}
  CHECK(st.mean_sentence_length.at("review") == 5.0);
  CHECK(st.mean_sentence_length.at("phone_conv") == 9.0);
  CHECK(st.sentence_length_std == doctest::Approx(2.0));

  Corpus tens;
  Document d{"t", "review", {}};
  for (int i = 0; i < 10; ++i) {
    d.sentences.push_back(i < 4 ? make_sentence(4, {{0, 1, "T1"}, {2, 3, "T1"}}) : make_sentence(4, {{0, 1, "T1"}}));
  }
  tens.documents.push_back(d);
  const CorpusStats ts = corpus_stats(tens);
  CHECK(ts.multi_event_proportion == doctest::Approx(0.4));
  CHECK(ts.trigger_length_histogram[1] == 0);
  CHECK(ts.trigger_length_histogram[2] == 0);
}

TEST_CASE("word-trigger mismatch categories") {
  Sentence s;
  s.tokens = {"菜", "里", "有", "毛", "发"};
  const auto words = split_segmentation_line("菜里/有/毛发");
  CHECK(words == std::vector<std::string>{"菜里", "有", "毛发"});
  const auto bounds = word_boundaries(s, words);
  CHECK(bounds == std::vector<std::size_t>{0, 2, 3, 5});
  CHECK(classify_trigger({3, 5, "T"}, bounds) == TriggerWordFit::kRegular);
  CHECK(classify_trigger({2, 5, "T"}, bounds) == TriggerWordFit::kCrossWord);
  CHECK(classify_trigger({3, 4, "T"}, bounds) == TriggerWordFit::kInsideWord);

  Corpus c;
  s.mentions = {{3, 5, "T"}, {2, 5, "T1"}, {3, 4, "T2"}};
  c.documents.push_back({"z", "review", {s}});
  const MismatchStats m = word_trigger_mismatch(c, {words});
  CHECK(m.regular == 1);
  CHECK(m.cross_word == 1);
  CHECK(m.inside_word == 1);
  CHECK(m.regular_pct + m.cross_word_pct + m.inside_word_pct == doctest::Approx(100.0).epsilon(1e-11));

  CHECK_THROWS_AS(word_boundaries(s, split_segmentation_line("菜里/有")), CorpusError);
  CHECK_THROWS_AS(word_trigger_mismatch(c, {}), CorpusError);
}

}  // TEST_SUITE
