#pragma once

// Brute-force matcher and random corpora for checking the scorer.

#include <algorithm>
#include <string>
#include <vector>

#include "evtrace/metrics.hpp"
#include "evtrace/random.hpp"
#include "test_util.hpp"

namespace evtrace::testing {

// Independent pairwise-loop matcher: duplicates (on the mode's key) are
// skipped by scanning earlier entries, matches by scanning all gold.
struct Counts {
  std::size_t tp = 0, predicted = 0, gold = 0;
};

inline bool same(std::size_t s1, std::size_t e1, const std::string& t1, std::size_t s2, std::size_t e2,
          const std::string& t2, MatchMode mode) {
  return s1 == s2 && e1 == e2 && (mode == MatchMode::kIdentification || t1 == t2);
}

inline Counts brute_force(const Corpus& gold, const PredictionSet& preds, MatchMode mode) {
  Counts c;
  for (const auto& d : gold.documents) {
    for (std::size_t si = 0; si < d.sentences.size(); ++si) {
      const auto& g = d.sentences[si].mentions;
      std::vector<PredictedEvent> p;
      if (auto it = preds.find(sentence_id(d.id, si)); it != preds.end()) p = it->second;
      for (std::size_t i = 0; i < g.size(); ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < i; ++j) dup |= same(g[i].start, g[i].end, g[i].type, g[j].start, g[j].end, g[j].type, mode);
        if (!dup) ++c.gold;
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < i; ++j) dup |= same(p[i].start, p[i].end, p[i].type, p[j].start, p[j].end, p[j].type, mode);
        if (dup) continue;
        ++c.predicted;
        bool hit = false;
        for (const auto& m : g) hit |= same(p[i].start, p[i].end, p[i].type, m.start, m.end, m.type, mode);
        c.tp += hit;
      }
    }
  }
  return c;
}

struct RandomCase {
  Corpus gold;
  PredictionSet predictions;
};

inline RandomCase random_case(Rng& rng) {
  static const std::vector<std::string> types{"T1", "T2", "T3"};
  RandomCase rc;
  const std::size_t sentences = 1 + uniform_index(rng, 20);
  Document d{"doc", "review", {}};
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t len = 3 + uniform_index(rng, 6);
    Sentence sent = make_sentence(len, {});
    const std::size_t k = uniform_index(rng, 4);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t start = uniform_index(rng, len);
      const Mention m{start, start + 1 + uniform_index(rng, std::min<std::size_t>(2, len - start)),
                      types[uniform_index(rng, types.size())]};
      if (std::find(sent.mentions.begin(), sent.mentions.end(), m) == sent.mentions.end()) sent.mentions.push_back(m);
    }
    std::vector<PredictedEvent> pred;
    const std::size_t np = uniform_index(rng, 5);
    for (std::size_t i = 0; i < np; ++i) {
      if (!sent.mentions.empty() && uniform(rng, 0.0, 1.0) < 0.5) {
        const Mention& m = sent.mentions[uniform_index(rng, sent.mentions.size())];
        // Sometimes keep the span but change the type.
        pred.push_back({uniform(rng, 0.0, 1.0) < 0.7 ? m.type : types[uniform_index(rng, types.size())], m.start, m.end});
      } else {
        const std::size_t start = uniform_index(rng, len);
        pred.push_back({types[uniform_index(rng, types.size())], start, start + 1});
      }
    }
    if (!pred.empty() || uniform(rng, 0.0, 1.0) < 0.5) rc.predictions[sentence_id(d.id, s)] = pred;
    d.sentences.push_back(std::move(sent));
  }
  rc.gold.documents.push_back(std::move(d));
  return rc;
}

/// True when the scorer's counts and ratios equal the brute-force ones
/// exactly in both match modes.
inline bool scorer_matches_brute_force(const RandomCase& rc) {
  for (MatchMode mode : {MatchMode::kIdentification, MatchMode::kClassification}) {
    const Counts c = brute_force(rc.gold, rc.predictions, mode);
    const PRF r = score(rc.gold, rc.predictions, mode);
    const double p = c.predicted ? double(c.tp) / double(c.predicted) : 0.0;
    const double rec = c.gold ? double(c.tp) / double(c.gold) : 0.0;
    const double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
    if (r.true_positives != c.tp || r.predicted != c.predicted || r.gold != c.gold ||
        r.precision != p || r.recall != rec || r.f1 != f1)
      return false;
  }
  return true;
}

}  // namespace evtrace::testing
