#include "evtrace/decoder.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "evtrace/strategies.hpp"

namespace evtrace {

Var attention_weights(Tape& tape, const DecoderParams& params, Var decoder_state, Var features) {
  const Tensor& wa = params.attention->value;
  const Tensor& s = decoder_state.value();
  const Tensor& h = features.value();
  if (h.rank() != 2 || h.cols() != wa.rows() || s.size() != wa.cols()) {
    throw ShapeError("attention_weights: features " + shape_string(h.shape()) + ", state " +
                     shape_string(s.shape()) + " do not conform to W_a " + shape_string(wa.shape()));
  }
  // scores_i = h_i . (W_a s)
  Var projected = matmul(tape.param(*params.attention), decoder_state);
  return softmax(matmul(features, projected));
}

TraceMask trace_mask(const Tensor& preliminary, std::optional<std::size_t> gold_index, double rho,
                     Rng* rng) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("trace_mask: rho outside [0, 1]");
  const std::size_t n = preliminary.size();
  TraceMask out;
  out.mask = Tensor({n});
  if (gold_index) {
    if (*gold_index >= n) {
      throw std::out_of_range("trace_mask: gold index " + std::to_string(*gold_index) +
                              " outside " + std::to_string(n) + " positions");
    }
    if (rho > 0.0 && rho < 1.0 && rng == nullptr) {
      throw std::invalid_argument("trace_mask: stochastic rho needs a generator");
    }
    out.used_gold = rho >= 1.0 ? true : (rho <= 0.0 ? false : bernoulli(*rng, rho));
  }
  if (out.used_gold) {
    out.selected = *gold_index;
  } else {
    const auto& v = preliminary.values();
    out.selected = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  out.mask[out.selected] = 1.0;
  return out;
}

Var context_vector(Var weights, Var features) {
  const Tensor& w = weights.value();
  const Tensor& h = features.value();
  if (w.rank() != 1 || h.rank() != 2 || w.size() != h.rows()) {
    throw ShapeError("context_vector: weights " + shape_string(w.shape()) + " vs features " +
                     shape_string(h.shape()));
  }
  return matmul(weights, features);
}

DecoderState initial_decoder_state(Tape& tape, const TracingModel& model) {
  const ModelConfig& c = model.config();
  return {zero_state(tape, c.decoder_dim), tape.constant(Tensor({c.feature_dim()})),
          model.schema().bos_id()};
}

StepResult decode_step(Tape& tape, const TracingModel& model, Var features, const DecoderState& prev,
                       std::optional<std::size_t> gold_index, double rho, Rng* rng) {
  const DecoderParams& params = model.decoder();
  const std::size_t labels = model.schema().label_count();
  if (prev.prev_label >= labels) {
    throw std::out_of_range("decode_step: label id " + std::to_string(prev.prev_label) +
                            " outside " + std::to_string(labels) + " labels");
  }
  const std::size_t one[] = {prev.prev_label};
  Var label_vec = sum_axis(embedding_lookup(tape.param(*params.label_embedding), one), 0);
  LstmState lstm = lstm_step(tape, params.cell, concat(label_vec, prev.context), prev.lstm);

  StepResult r;
  r.attention = attention_weights(tape, params, lstm.hidden, features);
  r.mask = trace_mask(r.attention.value(), gold_index, rho, rng);
  Var applied = tape.constant(r.mask.mask);
  if (model.config().mask_mode == MaskMode::kScaleByWeight) applied = mul(applied, r.attention);
  Var context = context_vector(applied, features);
  r.logits = matmul(concat(lstm.hidden, context), tape.param(*params.output));
  r.probs = softmax(r.logits);
  r.state = DecoderState{lstm, context, prev.prev_label};
  return r;
}

Example make_example(const Sentence& sentence, std::string_view domain, bool labeled,
                     const TracingModel& model) {
  if (!labeled && !sentence.mentions.empty()) {
    throw std::logic_error("unlabeled example carries gold mentions");
  }
  Example ex;
  ex.token_ids = model.vocab().encode(sentence.tokens);
  ex.target = build_decoding_target(sentence, model.schema());
  ex.domain = model.config().domains.empty() ? 0 : model.domain_index(domain);
  ex.labeled = labeled;
  return ex;
}

std::vector<Example> make_examples(const Corpus& corpus, const TracingModel& model) {
  std::vector<Example> out;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) out.push_back(make_example(s, doc.domain, doc.labeled, model));
  }
  return out;
}

Tensor bag_of_labels_target(const DecodingTarget& target, const EventSchema& schema) {
  Tensor bag({schema.label_count()});
  for (const auto& step : target.steps) {
    if (step.label == schema.eos_id() || step.label == schema.bos_id()) continue;
    bag[step.label] = 1.0;
  }
  return bag;
}

Tensor gold_attention(const TargetStep& step, std::size_t row_count) {
  Tensor gold({row_count});
  if (step.gold_positions.empty()) throw std::invalid_argument("gold_attention: no gold positions");
  const double mass = 1.0 / static_cast<double>(step.gold_positions.size());
  for (std::size_t p : step.gold_positions) {
    if (p >= row_count) throw std::out_of_range("gold_attention: position outside sentence");
    gold[p] = mass;
  }
  return gold;
}

std::vector<LossTerm> LossGraph::terms() const {
  std::vector<LossTerm> out{
      {std::string(loss_names::kGeneration), generation, 1.0},
      {std::string(loss_names::kAttention), attention, values.weights.attention},
      {std::string(loss_names::kBagOfLabels), bag_of_labels, values.weights.bag_of_labels},
  };
  if (domain) out.push_back({std::string(loss_names::kDomain), *domain, values.weights.domain});
  return out;
}

namespace {

Var accumulate_sum(Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) return tape.constant(Tensor::scalar(0.0));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

}  // namespace

LossGraph compute_losses(Tape& tape, const TracingModel& model, std::span<const Example> batch,
                         const LossWeights& weights, double rho, Rng& rng,
                         std::optional<double> reversal_coefficient) {
  if (batch.empty()) throw std::invalid_argument("compute_losses: empty batch");
  const EventSchema& schema = model.schema();
  const bool with_domain = weights.domain != 0.0;
  if (with_domain && (!model.heads() || model.heads()->classifier_weight == nullptr)) {
    throw std::logic_error("compute_losses: domain loss requested but the model has no classifier");
  }

  LossGraph graph;
  std::vector<Var> gen_terms, att_terms, bag_terms, dom_terms;
  for (const Example& ex : batch) {
    EncodedSentence encoded = encode(tape, model.encoder(), ex.token_ids);
    if (with_domain) {
      dom_terms.push_back(domain_aux_loss(tape, model, pooled_features(tape, encoded), ex.domain,
                                          reversal_coefficient));
    }
    if (!ex.labeled) continue;
    Var features = transform_features(tape, model, encoded.rows, ex.domain);
    const std::size_t rows = ex.token_ids.size() + 2;

    DecoderState state = initial_decoder_state(tape, model);
    std::vector<Var> step_logits;
    for (const TargetStep& step : ex.target.steps) {
      StepResult r = decode_step(tape, model, features, state, step.gold_index, rho, &rng);
      if (r.mask.used_gold) ++graph.gold_mask_picks;
      else ++graph.predicted_mask_picks;
      Tensor gold_label({schema.label_count()});
      gold_label[step.label] = 1.0;
      gen_terms.push_back(kl_div(gold_label, r.probs));  // = -log y_t[gold]
      att_terms.push_back(kl_div(gold_attention(step, rows), r.attention));
      step_logits.push_back(r.logits);
      state = r.state;
      state.prev_label = step.label;
    }
    Var bag_probs = sigmoid(accumulate_sum(tape, step_logits));
    bag_terms.push_back(kl_div(bag_of_labels_target(ex.target, schema), bag_probs));
  }

  graph.generation = accumulate_sum(tape, gen_terms);
  graph.attention = accumulate_sum(tape, att_terms);
  graph.bag_of_labels = accumulate_sum(tape, bag_terms);
  if (with_domain) graph.domain = accumulate_sum(tape, dom_terms);

  LossBreakdown& v = graph.values;
  v.weights = weights;
  v.generation = graph.generation.value().item();
  v.attention = graph.attention.value().item();
  v.bag_of_labels = graph.bag_of_labels.value().item();
  v.domain = graph.domain ? graph.domain->value().item() : 0.0;
  v.total = v.generation + weights.attention * v.attention + weights.bag_of_labels * v.bag_of_labels +
            weights.domain * v.domain;
  return graph;
}

}  // namespace evtrace
