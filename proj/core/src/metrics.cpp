#include "evtrace/metrics.hpp"

#include <set>
#include <stdexcept>
#include <tuple>

namespace evtrace {

std::string_view to_string(MatchMode mode) {
  return mode == MatchMode::kIdentification ? "identification" : "classification";
}

MatchMode parse_match_mode(std::string_view text) {
  if (text == "identification") return MatchMode::kIdentification;
  if (text == "classification") return MatchMode::kClassification;
  throw std::invalid_argument("unknown match mode '" + std::string(text) + "'");
}

PRF PRF::from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  PRF r;
  r.true_positives = tp;
  r.predicted = predicted;
  r.gold = gold;
  r.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

PRF& PRF::operator+=(const PRF& other) {
  *this = from_counts(true_positives + other.true_positives, predicted + other.predicted,
                      gold + other.gold);
  return *this;
}

namespace {

using Key = std::tuple<std::size_t, std::size_t, std::string>;

Key key_of(std::size_t start, std::size_t end, const std::string& type, MatchMode mode) {
  return {start, end, mode == MatchMode::kClassification ? type : std::string()};
}

TaskScores score_pair(const std::vector<Mention>& gold, const std::vector<PredictedEvent>& pred) {
  return {score_sentence(gold, pred, MatchMode::kIdentification),
          score_sentence(gold, pred, MatchMode::kClassification)};
}

void accumulate(TaskScores& acc, const TaskScores& s) {
  acc.identification += s.identification;
  acc.classification += s.classification;
}

const std::vector<PredictedEvent>& lookup(const PredictionSet& p, const std::string& id) {
  static const std::vector<PredictedEvent> kEmpty;
  auto it = p.find(id);
  return it == p.end() ? kEmpty : it->second;
}

void check_ids(const Corpus& gold, const PredictionSet& predictions) {
  std::set<std::string> known;
  for (const auto& d : gold.documents)
    for (std::size_t i = 0; i < d.sentences.size(); ++i) known.insert(sentence_id(d.id, i));
  for (const auto& [id, events] : predictions) {
    if (!known.count(id)) throw CorpusError("prediction for unknown sentence id '" + id + "'");
  }
}

}  // namespace

PRF score_sentence(const std::vector<Mention>& gold, const std::vector<PredictedEvent>& predicted,
                   MatchMode mode) {
  std::set<Key> g, p;
  for (const auto& m : gold) g.insert(key_of(m.start, m.end, m.type, mode));
  for (const auto& e : predicted) p.insert(key_of(e.start, e.end, e.type, mode));
  std::size_t tp = 0;
  for (const auto& k : p) tp += g.count(k);
  return PRF::from_counts(tp, p.size(), g.size());
}

EvalReport score(const Corpus& gold, const PredictionSet& predictions) {
  check_ids(gold, predictions);
  EvalReport report;
  for (const auto& doc : gold.documents) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const auto& mentions = doc.sentences[i].mentions;
      const auto& pred = lookup(predictions, sentence_id(doc.id, i));
      const TaskScores s = score_pair(mentions, pred);
      accumulate(report.overall, s);
      accumulate(report.per_domain[doc.domain], s);

      std::set<std::string> types;
      for (const auto& m : mentions) types.insert(m.type);
      for (const auto& e : pred) types.insert(e.type);
      for (const auto& t : types) {
        std::vector<Mention> gm;
        std::vector<PredictedEvent> pm;
        for (const auto& m : mentions)
          if (m.type == t) gm.push_back(m);
        for (const auto& e : pred)
          if (e.type == t) pm.push_back(e);
        accumulate(report.per_type[t], score_pair(gm, pm));
      }
    }
  }
  return report;
}

PRF score(const Corpus& gold, const PredictionSet& predictions, MatchMode mode) {
  return score(gold, predictions).overall.get(mode);
}

EventCountReport score_by_event_count(const Corpus& gold, const PredictionSet& predictions) {
  check_ids(gold, predictions);
  EventCountReport report;
  for (const auto& doc : gold.documents) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const auto& mentions = doc.sentences[i].mentions;
      const TaskScores s = score_pair(mentions, lookup(predictions, sentence_id(doc.id, i)));
      if (mentions.empty()) {
        accumulate(report.single, s);
        accumulate(report.multiple, s);
      } else if (mentions.size() == 1) {
        accumulate(report.single, s);
        ++report.single_sentences;
      } else {
        accumulate(report.multiple, s);
        ++report.multiple_sentences;
      }
    }
  }
  return report;
}

}  // namespace evtrace
