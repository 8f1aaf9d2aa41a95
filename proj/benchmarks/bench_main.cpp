#include <benchmark/benchmark.h>

#include "evtrace/autodiff.hpp"
#include "evtrace/decoder.hpp"
#include "evtrace/encoder.hpp"
#include "evtrace/inference.hpp"
#include "evtrace/optim.hpp"
#include "evtrace/random.hpp"
#include "evtrace/synth.hpp"

using namespace evtrace;

namespace {

struct Fixture {
  EventSchema schema = EventSchema::food_safety();
  Corpus corpus;
  TracingModel model;

  explicit Fixture(std::size_t dim)
      : corpus(generate_synthetic_corpus(3, default_synth_spec(schema, 20), schema).corpus),
        model(config(dim), schema, Vocabulary::from_corpus(corpus), 3) {}

  static ModelConfig config(std::size_t dim) {
    ModelConfig c;
    c.embedding_dim = c.hidden_dim = c.decoder_dim = dim;
    return c;
  }
  std::vector<std::size_t> first_sentence_ids() const {
    return model.vocab().encode(corpus.documents[0].sentences[0].tokens);
  }
};

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_substream(1, "bench");
  Parameter a("a", xavier_uniform(rng, n, n));
  Parameter b("b", xavier_uniform(rng, n, n));
  for (auto _ : state) {
    Tape tape;
    tape.backward(sum_all(tanh(matmul(tape.param(a), tape.param(b)))));
    benchmark::DoNotOptimize(a.grad.data().data());
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(64);

void BM_Encode(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const auto ids = f.first_sentence_ids();
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(encode(tape, f.model.encoder(), ids));
  }
}
BENCHMARK(BM_Encode)->Arg(16)->Arg(32);

void BM_TrainingStep(benchmark::State& state) {
  Fixture f(32);
  std::vector<Example> batch = make_examples(f.corpus, f.model);
  batch.resize(std::min<std::size_t>(batch.size(), 16));
  Optimizer opt(OptimizerConfig{UpdateRule::kAdam, 1e-3, 0.9, 0.999, 1e-8, 5.0});
  Rng rng = make_substream(3, "teacher_forcing");
  for (auto _ : state) {
    f.model.params().zero_grad();
    Tape tape;
    LossGraph g = compute_losses(tape, f.model, batch, {}, 0.9, rng);
    const auto terms = g.terms();
    tape.backward(terms);
    opt.step(f.model.params());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_TrainingStep);

void BM_BeamSearch(benchmark::State& state) {
  const Fixture f(32);
  const auto ids = f.first_sentence_ids();
  const BeamConfig beam{static_cast<std::size_t>(state.range(0)), 8};
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(f.model, ids, 0, beam));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
