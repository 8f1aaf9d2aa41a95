#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evtrace::cli {

struct SynthOptions {
  std::string out;
  std::string schema;
  std::string lexicon_out;
  std::size_t docs_per_domain = 400;
  double multi_event = 0.35;
  std::size_t lexemes_per_type = 2;
  double multi_token_rate = 0.15;
  std::size_t domain_distractor_vocab = 0;
  double domain_distractor_rate = 0.0;
};

struct SplitOptions {
  std::string corpus;
  std::string schema;
  std::string out;
};

struct TrainOptions {
  std::string corpus;
  std::string split;
  std::string schema;
  std::string checkpoint;
  std::string loss_log;
  std::string report;
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t decoder_dim = 32;
  std::size_t label_embedding_dim = 16;
  std::string mask_mode = "select";
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::string optimizer = "adam";
  double learning_rate = 5e-3;
  double clip_norm = 5.0;
  double rho = 0.9;
  double alpha = 1.0;
  double beta = 0.1;
  double augment_ratio = 0.0;
  std::size_t max_sentence_length = 64;
  std::string strategy = "PD";
  std::vector<std::string> domains;
  double domain_weight = 0.1;
  double reversal = 1.0;
  std::size_t shared_dim = 16;
  std::size_t private_dim = 16;
  bool mdsp_sum = false;
  // Used by ADA runs, which tune and evaluate right after training.
  std::size_t beam_width = 4;
  std::size_t max_length = 8;
  std::string tune_mode = "classification";
};

struct TuneOptions {
  std::string checkpoint;
  std::string corpus;
  std::string split;
  std::string part = "dev";
  std::string mode = "classification";
  std::size_t beam_width = 4;
  std::size_t max_length = 8;
  std::string out;
  std::string report;
};

struct PredictOptions {
  std::string checkpoint;
  std::string corpus;
  std::string split;
  std::string part = "test";
  std::string threshold = "tune";
  std::string tune_part = "dev";
  std::string tune_mode = "classification";
  std::size_t beam_width = 4;
  std::size_t max_length = 8;
  std::string out;
};

struct EvalOptions {
  std::string gold;
  std::string split;
  std::string part = "test";
  std::string schema;
  std::string predictions;
  std::string out;
};

struct AnalyzeOptions {
  std::string corpus;
  std::string schema;
  std::string segmentation;
  std::string annotations;
  std::string out;
};

struct Options {
  std::uint64_t seed = 13;
  SynthOptions synth;
  SplitOptions split;
  TrainOptions train;
  TuneOptions tune;
  PredictOptions predict;
  EvalOptions eval;
  AnalyzeOptions analyze;
};

}  // namespace evtrace::cli
