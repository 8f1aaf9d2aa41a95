#include "evtrace/strategies.hpp"

#include <algorithm>
#include <stdexcept>

namespace evtrace {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kSD: return "SD";
    case Strategy::kPD: return "PD";
    case Strategy::kPDMT: return "PDMT";
    case Strategy::kMDSP: return "MDSP";
    case Strategy::kADA: return "ADA";
  }
  return "PD";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "SD") return Strategy::kSD;
  if (text == "PD") return Strategy::kPD;
  if (text == "PDMT") return Strategy::kPDMT;
  if (text == "MDSP") return Strategy::kMDSP;
  if (text == "ADA") return Strategy::kADA;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

Corpus strip_labels(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& d : out.documents) {
    d.labeled = false;
    for (auto& s : d.sentences) s.mentions.clear();
  }
  return out;
}

namespace {

Corpus filter_domain(const Corpus& corpus, std::string_view domain) {
  Corpus out;
  for (const auto& d : corpus.documents) {
    if (d.domain == domain) out.documents.push_back(d);
  }
  return out;
}

std::vector<std::string> all_domains(const CorpusSplits& s) {
  std::vector<std::string> out;
  for (const Corpus* c : {&s.train, &s.dev, &s.test}) {
    for (const auto& d : c->domains()) {
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    }
  }
  return out;
}

void require_known(const std::vector<std::string>& known, const std::string& domain) {
  if (std::find(known.begin(), known.end(), domain) == known.end()) {
    throw std::invalid_argument("unknown domain tag '" + domain + "'");
  }
}

}  // namespace

TrainingPlan apply_strategy(const CorpusSplits& splits, const StrategyConfig& config) {
  const auto known = all_domains(splits);
  for (const auto& d : config.domains) require_known(known, d);

  TrainingPlan plan;
  plan.shared_dim = config.shared_dim;
  plan.private_dim = config.private_dim;
  switch (config.strategy) {
    case Strategy::kSD: {
      if (config.domains.size() != 1) throw std::invalid_argument("SD needs exactly one domain");
      const auto& dom = config.domains[0];
      plan.data = {filter_domain(splits.train, dom), filter_domain(splits.dev, dom),
                   filter_domain(splits.test, dom)};
      break;
    }
    case Strategy::kPD:
      plan.data = splits;
      break;
    case Strategy::kPDMT:
      plan.data = splits;
      plan.model_domains = known;
      plan.domain_classifier = true;
      plan.domain_loss_weight = config.domain_loss_weight;
      break;
    case Strategy::kMDSP:
      plan.data = splits;
      plan.model_domains = known;
      plan.feature_mode = config.sum_shared_private ? FeatureMode::kSharedPrivateSum
                                                    : FeatureMode::kSharedPrivateConcat;
      break;
    case Strategy::kADA: {
      if (config.domains.size() != 2 || config.domains[0] == config.domains[1]) {
        throw std::invalid_argument("ADA needs one source and one distinct target domain");
      }
      const auto& source = config.domains[0];
      const auto& target = config.domains[1];
      Corpus train = filter_domain(splits.train, source);
      for (auto& d : strip_labels(filter_domain(splits.train, target)).documents) {
        train.documents.push_back(std::move(d));
      }
      // Model selection and evaluation use the labeled source dev split and
      // both test splits; target labels never reach training.
      Corpus test = filter_domain(splits.test, source);
      for (const auto& d : filter_domain(splits.test, target).documents) test.documents.push_back(d);
      plan.data = {std::move(train), filter_domain(splits.dev, source), std::move(test)};
      plan.model_domains = {source, target};
      plan.domain_classifier = true;
      plan.domain_loss_weight = config.domain_loss_weight;
      if (config.reversal_coefficient < 0.0) throw std::invalid_argument("negative reversal coefficient");
      plan.reversal_coefficient = config.reversal_coefficient;
      break;
    }
  }
  if (plan.data.train.documents.empty()) throw std::invalid_argument("strategy leaves no training data");
  return plan;
}

ModelConfig configure_model(ModelConfig model_config, const TrainingPlan& plan) {
  model_config.feature_mode = plan.feature_mode;
  model_config.domain_classifier = plan.domain_classifier;
  model_config.domains = plan.model_domains;
  model_config.shared_dim = plan.shared_dim;
  model_config.private_dim = plan.private_dim;
  return model_config;
}

Var transform_features(Tape& tape, const TracingModel& model, Var rows, std::size_t domain) {
  const ModelConfig& c = model.config();
  if (c.feature_mode == FeatureMode::kIdentity) return rows;
  const DomainHeads& heads = *model.heads();
  if (domain >= heads.private_weight.size()) {
    throw std::invalid_argument("transform_features: domain index " + std::to_string(domain) +
                                " has no private transform");
  }
  Var shared = tanh(add(matmul(rows, tape.param(*heads.shared_weight)), tape.param(*heads.shared_bias)));
  Var priv = tanh(add(matmul(rows, tape.param(*heads.private_weight[domain])),
                      tape.param(*heads.private_bias[domain])));
  if (c.feature_mode == FeatureMode::kSharedPrivateSum) return add(shared, priv);
  // Row-wise concatenation as two matmuls with fixed placement matrices.
  const std::size_t sw = c.shared_dim, pw = c.private_dim;
  Tensor place_shared({sw, sw + pw}), place_private({pw, sw + pw});
  for (std::size_t i = 0; i < sw; ++i) place_shared.at(i, i) = 1.0;
  for (std::size_t i = 0; i < pw; ++i) place_private.at(i, sw + i) = 1.0;
  return add(matmul(shared, tape.constant(std::move(place_shared))),
             matmul(priv, tape.constant(std::move(place_private))));
}

Var pooled_features(Tape& tape, const EncodedSentence& encoded) {
  const std::size_t n = encoded.token_count;
  Tensor weights({n + 2});
  for (std::size_t i = 1; i <= n; ++i) weights[i] = 1.0 / static_cast<double>(n);
  return matmul(tape.constant(std::move(weights)), encoded.rows);
}

namespace {

Var domain_logits(Tape& tape, const TracingModel& model, Var pooled) {
  if (!model.heads() || model.heads()->classifier_weight == nullptr) {
    throw std::logic_error("model has no domain classifier");
  }
  const DomainHeads& heads = *model.heads();
  return add(matmul(pooled, tape.param(*heads.classifier_weight)), tape.param(*heads.classifier_bias));
}

}  // namespace

Var domain_aux_loss(Tape& tape, const TracingModel& model, Var pooled, std::size_t domain,
                    std::optional<double> reversal_coefficient) {
  Var features = reversal_coefficient ? gradient_reversal(pooled, *reversal_coefficient) : pooled;
  Var probs = softmax(domain_logits(tape, model, features));
  if (domain >= probs.value().size()) throw std::invalid_argument("domain_aux_loss: domain out of range");
  Tensor target({probs.value().size()});
  target[domain] = 1.0;
  return kl_div(target, probs);
}

std::size_t classify_domain(Tape& tape, const TracingModel& model, Var pooled) {
  const Tensor& logits = domain_logits(tape, model, pooled).value();
  return static_cast<std::size_t>(
      std::max_element(logits.values().begin(), logits.values().end()) - logits.values().begin());
}

}  // namespace evtrace
