#include "evtrace/uda.hpp"

#include <stdexcept>

#include "evtrace/encoder.hpp"

namespace evtrace {

namespace {

Corpus only_domain(const Corpus& c, std::string_view domain) {
  Corpus out;
  for (const auto& d : c.documents) {
    if (d.domain == domain) out.documents.push_back(d);
  }
  return out;
}

}  // namespace

void check_no_target_labels(const Corpus& train, std::string_view target) {
  for (const auto& d : train.documents) {
    if (d.domain != target) continue;
    bool has_mentions = false;
    for (const auto& s : d.sentences) has_mentions |= !s.mentions.empty();
    if (d.labeled || has_mentions) {
      throw std::logic_error("target labels leak into training through document '" + d.id + "'");
    }
  }
}

double domain_classifier_accuracy(const TracingModel& model, const Corpus& held_out) {
  std::size_t correct = 0, total = 0;
  for (const auto& d : held_out.documents) {
    const std::size_t want = model.domain_index(d.domain);
    for (const auto& s : d.sentences) {
      Tape tape;
      const auto ids = model.vocab().encode(s.tokens);
      EncodedSentence enc = encode(tape, model.encoder(), ids);
      correct += classify_domain(tape, model, pooled_features(tape, enc)) == want;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

UdaResult run_uda(const CorpusSplits& splits, const UdaConfig& config) {
  if (config.strategy.strategy != Strategy::kADA) throw std::invalid_argument("run_uda: strategy must be ADA");
  const TrainingPlan plan = apply_strategy(splits, config.strategy);
  const std::string& source = config.strategy.domains[0];
  const std::string& target = config.strategy.domains[1];
  check_no_target_labels(plan.data.train, target);
  for (const auto& d : {source, target}) {
    if (only_domain(plan.data.test, d).documents.empty()) {
      throw std::invalid_argument("run_uda: test split has no '" + d + "' documents");
    }
  }

  TrainConfig train_cfg = config.train;
  train_cfg.weights.domain = plan.domain_loss_weight;
  train_cfg.reversal_coefficient = plan.reversal_coefficient;

  UdaResult result{TracingModel(configure_model(config.model, plan), config.schema,
                                Vocabulary::from_corpus(plan.data.train), config.train.seed),
                   0.1, {}, {}, {}, {}};
  // Held-out features for the trend: dev documents of both domains. Only
  // their tokens are used.
  Corpus held_out = only_domain(splits.dev, source);
  for (const auto& d : only_domain(splits.dev, target).documents) held_out.documents.push_back(d);

  result.log = train(result.model, plan.data.train, plan.data.dev, train_cfg,
                     [&](const EpochLog& log, const TracingModel& m) {
                       result.trend.push_back({log.epoch, log.train, domain_classifier_accuracy(m, held_out)});
                     });

  result.threshold = tune_threshold(result.model, plan.data.dev, config.tune_mode, config.beam).best;
  for (const auto& [domain, report] : {std::pair{source, &result.in_domain}, std::pair{target, &result.out_of_domain}}) {
    const Corpus test = only_domain(plan.data.test, domain);
    *report = score(test, to_prediction_set(predict_corpus(result.model, test, config.beam, result.threshold)));
  }
  return result;
}

}  // namespace evtrace
