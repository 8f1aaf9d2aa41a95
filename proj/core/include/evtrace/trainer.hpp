#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtrace/corpus.hpp"
#include "evtrace/decoder.hpp"
#include "evtrace/model.hpp"
#include "evtrace/optim.hpp"

namespace evtrace {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer{UpdateRule::kAdam, 5e-3, 0.9, 0.999, 1e-8, 5.0};
  double rho = 0.9;
  LossWeights weights;
  /// Gradient-reversal coefficient for the domain loss (ADA).
  std::optional<double> reversal_coefficient;
  std::uint64_t seed = 13;
  /// Concatenated sentence pairs added per epoch, as a share of the
  /// labeled training sentences.
  double augment_ratio = 0.0;
  std::size_t max_sentence_length = 64;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train;
  std::optional<LossBreakdown> dev;
  long gold_mask_picks = 0;
  long predicted_mask_picks = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
};

using EpochCallback = std::function<void(const EpochLog&, const TracingModel&)>;

/// Minibatch optimization of J with the attention barrier in force.
/// Deterministic per config.seed. Throws TrainingDiverged when J becomes
/// non-finite. Unlabeled documents only feed the domain loss and are skipped
/// when that loss is off.
TrainResult train(TracingModel& model, const Corpus& train_split, const Corpus& dev_split,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Loss over a split with teacher forcing at rho = 1 and no parameter update.
LossBreakdown evaluate_loss(const TracingModel& model, const Corpus& split, const TrainConfig& config);

/// Tab-separated log, one line per epoch, values printed with 17 significant
/// digits so identical runs give byte-identical logs.
std::string format_loss_log(const TrainResult& result);

}  // namespace evtrace
