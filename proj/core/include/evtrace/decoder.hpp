#pragma once

// Tracing-attention decoder.
//
// At step t the decoder LSTM consumes the previous label embedding and the
// previous context, giving state s_t. Preliminary attention over the feature
// rows is softmax_i(h_i . W_a s_t). A one-hot mask I_t picks one row, either
// the gold trigger position (with probability rho during training) or the
// argmax of the preliminary weights. The context c_t is the picked row, and
// the label distribution is softmax(W_d^T [s_t ; c_t]).

#include <optional>
#include <span>
#include <vector>

#include "evtrace/autodiff.hpp"
#include "evtrace/corpus.hpp"
#include "evtrace/encoder.hpp"
#include "evtrace/model.hpp"
#include "evtrace/random.hpp"

namespace evtrace {

/// Per-step Bernoulli(rho) choice between gold and predicted mask.
struct TeacherForcingConfig {
  double rho = 0.9;
  std::uint64_t seed = 0;
};

struct TraceMask {
  std::size_t selected = 0;
  bool used_gold = false;
  Tensor mask;  // one-hot
};

/// Preliminary attention weights over the rows of `features`.
Var attention_weights(Tape& tape, const DecoderParams& params, Var decoder_state, Var features);

/// Samples m ~ Bernoulli(rho) when a gold index is given and returns the
/// gold one-hot for m = 1, the argmax one-hot otherwise. Without a gold index
/// (inference) the argmax is always used and no randomness is consumed.
TraceMask trace_mask(const Tensor& preliminary, std::optional<std::size_t> gold_index, double rho,
                     Rng* rng);

/// sum_i weights_i * features_i.
Var context_vector(Var weights, Var features);

struct DecoderState {
  LstmState lstm;
  Var context;
  LabelId prev_label = 0;
};

/// s_0 = 0, c_0 = 0, first input label BOS.
DecoderState initial_decoder_state(Tape& tape, const TracingModel& model);

struct StepResult {
  DecoderState state;  // carries s_t, c_t and the label fed at t + 1
  Var attention;       // preliminary weights
  TraceMask mask;
  Var logits;          // o_t
  Var probs;           // y_t
};

/// One decoding step from `prev`, feeding prev.prev_label. The caller sets
/// the returned state's prev_label to the label chosen at this step (gold
/// under teacher forcing, the hypothesis label in search).
StepResult decode_step(Tape& tape, const TracingModel& model, Var features, const DecoderState& prev,
                       std::optional<std::size_t> gold_index, double rho, Rng* rng);

/// A training instance prepared for the model.
struct Example {
  std::vector<std::size_t> token_ids;
  DecodingTarget target;
  std::size_t domain = 0;
  bool labeled = true;
};

/// Converts every sentence of `corpus`. Domain indices follow the model's
/// domain list (0 when the model has none).
std::vector<Example> make_examples(const Corpus& corpus, const TracingModel& model);
Example make_example(const Sentence& sentence, std::string_view domain, bool labeled,
                     const TracingModel& model);

struct LossWeights {
  double attention = 1.0;      // alpha
  double bag_of_labels = 0.1;  // beta
  double domain = 0.0;         // lambda_dom
};

struct LossBreakdown {
  double generation = 0.0;
  double attention = 0.0;
  double bag_of_labels = 0.0;
  double domain = 0.0;
  double total = 0.0;  // J = L_Gen + alpha L_Att + beta L_Bol + lambda L_dom
  LossWeights weights;
};

struct LossGraph {
  Var generation;
  Var attention;
  Var bag_of_labels;
  std::optional<Var> domain;
  LossBreakdown values;
  long gold_mask_picks = 0;
  long predicted_mask_picks = 0;

  /// Named, weighted terms for Tape::backward.
  std::vector<LossTerm> terms() const;
};

/// Builds the three-part objective (plus the optional domain loss) for a batch
/// under teacher forcing. Throws std::invalid_argument for an empty batch.
LossGraph compute_losses(Tape& tape, const TracingModel& model, std::span<const Example> batch,
                         const LossWeights& weights, double rho, Rng& rng,
                         std::optional<double> reversal_coefficient = std::nullopt);

/// Bag-of-labels target: 1 for labels in the decoding target except EOS/BOS.
Tensor bag_of_labels_target(const DecodingTarget& target, const EventSchema& schema);

/// Gold attention distribution over sentinel-padded rows.
Tensor gold_attention(const TargetStep& step, std::size_t row_count);

}  // namespace evtrace
