#include "evtrace/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "evtrace/random.hpp"

namespace evtrace {

namespace {

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
  acc.generation += b.generation;
  acc.attention += b.attention;
  acc.bag_of_labels += b.bag_of_labels;
  acc.domain += b.domain;
  acc.total += b.total;
  acc.weights = b.weights;
}

bool contributes(const Example& ex, const TrainConfig& config) {
  return ex.labeled || config.weights.domain != 0.0;
}

std::vector<Example> augmented_examples(const std::vector<Example>& labeled, const Corpus& corpus,
                                        const TracingModel& model, const TrainConfig& config,
                                        Rng& rng) {
  std::vector<const Sentence*> sentences;
  std::vector<std::string_view> domains;
  for (const auto& doc : corpus.documents) {
    if (!doc.labeled) continue;
    for (const auto& s : doc.sentences) {
      sentences.push_back(&s);
      domains.push_back(doc.domain);
    }
  }
  std::vector<Example> out;
  if (sentences.size() < 2) return out;
  const auto wanted =
      static_cast<std::size_t>(std::floor(config.augment_ratio * static_cast<double>(labeled.size())));
  for (std::size_t k = 0; k < wanted; ++k) {
    const std::size_t a = uniform_index(rng, sentences.size());
    const std::size_t b = uniform_index(rng, sentences.size());
    if (sentences[a]->tokens.size() + sentences[b]->tokens.size() > config.max_sentence_length) continue;
    // Pairs keep the first sentence's domain for private transforms.
    out.push_back(make_example(augment_concat(*sentences[a], *sentences[b], config.max_sentence_length),
                               domains[a], true, model));
  }
  return out;
}

}  // namespace

LossBreakdown evaluate_loss(const TracingModel& model, const Corpus& split, const TrainConfig& config) {
  LossBreakdown total;
  total.weights = config.weights;
  std::vector<Example> examples;
  for (auto& ex : make_examples(split, model)) {
    if (contributes(ex, config)) examples.push_back(std::move(ex));
  }
  Rng unused = make_substream(config.seed, "eval");
  for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
    const std::size_t end = std::min(examples.size(), start + config.batch_size);
    Tape tape;
    LossGraph g = compute_losses(tape, model, std::span(examples).subspan(start, end - start),
                                 config.weights, 1.0, unused, config.reversal_coefficient);
    add_into(total, g.values);
  }
  return total;
}

TrainResult train(TracingModel& model, const Corpus& train_split, const Corpus& dev_split,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_split.documents.empty()) throw std::invalid_argument("train: empty training split");
  if (dev_split.documents.empty()) throw std::invalid_argument("train: empty dev split");
  if (config.batch_size == 0 || config.epochs == 0) {
    throw std::invalid_argument("train: epochs and batch size must be positive");
  }
  if (config.rho < 0.0 || config.rho > 1.0) throw std::invalid_argument("train: rho outside [0, 1]");
  for (const auto& doc : train_split.documents) {
    if (!doc.labeled) {
      for (const auto& s : doc.sentences) {
        if (!s.mentions.empty()) throw std::logic_error("train: unlabeled document '" + doc.id + "' carries labels");
      }
    }
  }

  std::vector<Example> base;
  for (auto& ex : make_examples(train_split, model)) {
    if (contributes(ex, config)) base.push_back(std::move(ex));
  }
  if (base.empty()) throw std::invalid_argument("train: no usable training sentences");

  Rng shuffle_rng = make_substream(config.seed, "train.shuffle");
  Rng forcing_rng = make_substream(config.seed, "teacher_forcing");
  Rng augment_rng = make_substream(config.seed, "augment");
  Optimizer optimizer(config.optimizer);
  ParameterStore& params = model.params();
  params.zero_grad();

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<Example> examples = base;
    if (config.augment_ratio > 0.0) {
      for (auto& ex : augmented_examples(base, train_split, model, config, augment_rng)) {
        examples.push_back(std::move(ex));
      }
    }
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[uniform_index(shuffle_rng, i + 1)]);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train.weights = config.weights;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      Tape tape;
      LossGraph g = compute_losses(tape, model, batch, config.weights, config.rho, forcing_rng,
                                   config.reversal_coefficient);
      if (!std::isfinite(g.values.total)) {
        throw TrainingDiverged("train: objective became non-finite at epoch " + std::to_string(epoch) +
                               " (L_Gen=" + std::to_string(g.values.generation) +
                               ", L_Att=" + std::to_string(g.values.attention) +
                               ", L_Bol=" + std::to_string(g.values.bag_of_labels) + ")");
      }
      const auto terms = g.terms();
      tape.backward(terms);
      optimizer.step(params);
      params.zero_grad();
      add_into(log.train, g.values);
      log.gold_mask_picks += g.gold_mask_picks;
      log.predicted_mask_picks += g.predicted_mask_picks;
    }
    log.dev = evaluate_loss(model, dev_split, config);
    if (on_epoch) on_epoch(log, model);
    result.epochs.push_back(log);
  }
  return result;
}

std::string format_loss_log(const TrainResult& result) {
  std::string out = "epoch\tJ\tL_Gen\tL_Att\tL_Bol\tL_Dom\tdev_J\n";
  char buf[512];
  for (const auto& e : result.epochs) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", e.epoch,
                  e.train.total, e.train.generation, e.train.attention, e.train.bag_of_labels,
                  e.train.domain, e.dev ? e.dev->total : 0.0);
    out += buf;
  }
  return out;
}

}  // namespace evtrace
