#pragma once

#include <span>

#include "evtrace/autodiff.hpp"
#include "evtrace/model.hpp"

namespace evtrace {

struct LstmState {
  Var hidden;
  Var cell;
};

LstmState zero_state(Tape& tape, std::size_t hidden_dim);

/// One LSTM step on `input` (rank 1, length cell.input_dim).
LstmState lstm_step(Tape& tape, const LstmCell& cell, Var input, const LstmState& prev);

/// Contextual rows for a sentence: (n + 2) x 2h, where row 0 is the head
/// sentinel, row n + 1 the tail sentinel and row i + 1 token i. Each row is
/// [forward state ; backward state].
struct EncodedSentence {
  Var rows;
  std::size_t token_count = 0;
};

/// `token_ids` excludes the sentinels. Throws ShapeError for ids outside the
/// vocabulary.
EncodedSentence encode(Tape& tape, const EncoderParams& params, std::span<const std::size_t> token_ids);

}  // namespace evtrace
