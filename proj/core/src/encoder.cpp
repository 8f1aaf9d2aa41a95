#include "evtrace/encoder.hpp"

#include <string>
#include <vector>

namespace evtrace {

LstmState zero_state(Tape& tape, std::size_t hidden_dim) {
  return {tape.constant(Tensor({hidden_dim})), tape.constant(Tensor({hidden_dim}))};
}

LstmState lstm_step(Tape& tape, const LstmCell& cell, Var input, const LstmState& prev) {
  const std::size_t h = cell.hidden_dim;
  Var gates = add(matmul(tape.param(*cell.weight), concat(input, prev.hidden)),
                  tape.param(*cell.bias));
  Var in_gate = sigmoid(slice(gates, 0, h));
  Var forget_gate = sigmoid(slice(gates, h, h));
  Var candidate = tanh(slice(gates, 2 * h, h));
  Var out_gate = sigmoid(slice(gates, 3 * h, h));
  Var c = add(mul(forget_gate, prev.cell), mul(in_gate, candidate));
  return {mul(out_gate, tanh(c)), c};
}

EncodedSentence encode(Tape& tape, const EncoderParams& params,
                       std::span<const std::size_t> token_ids) {
  const std::size_t vocab = params.embedding->value.rows();
  std::vector<std::size_t> ids;
  ids.reserve(token_ids.size() + 2);
  ids.push_back(Vocabulary::kBos);
  for (std::size_t id : token_ids) {
    if (id >= vocab) {
      throw ShapeError("encode: token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
    ids.push_back(id);
  }
  ids.push_back(Vocabulary::kSep);

  const std::size_t n = ids.size();
  Var table = tape.param(*params.embedding);
  std::vector<Var> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t one[] = {ids[i]};
    inputs.push_back(embedding_lookup(table, one));
  }
  // embedding_lookup yields 1 x d; flatten to rank 1 via sum over rows.
  for (auto& v : inputs) v = sum_axis(v, 0);

  std::vector<Var> fwd(n), bwd(n);
  LstmState state = zero_state(tape, params.forward.hidden_dim);
  for (std::size_t i = 0; i < n; ++i) {
    state = lstm_step(tape, params.forward, inputs[i], state);
    fwd[i] = state.hidden;
  }
  state = zero_state(tape, params.backward.hidden_dim);
  for (std::size_t i = n; i-- > 0;) {
    state = lstm_step(tape, params.backward, inputs[i], state);
    bwd[i] = state.hidden;
  }
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back(concat(fwd[i], bwd[i]));
  return {stack_rows(rows), token_ids.size()};
}

}  // namespace evtrace
