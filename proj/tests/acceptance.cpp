// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.
// Criterion 6 trains a full-size model and takes a few minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "evtrace/analysis.hpp"
#include "evtrace/inference.hpp"
#include "evtrace/metrics.hpp"
#include "evtrace/strategies.hpp"
#include "evtrace/synth.hpp"
#include "evtrace/trainer.hpp"
#include "gradcheck.hpp"
#include "metric_oracle.hpp"
#include "model_checks.hpp"
#include "primitive_checks.hpp"
#include "test_util.hpp"

using namespace evtrace;
using namespace evtrace::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  double prim = 0.0;
  for (const auto& [name, e] : primitive_gradient_errors(2, 3)) prim = std::max(prim, e);

  // Gradient reversal: analytic = -lambda * finite difference of the forward.
  Rng rng = make_substream(6, "grl");
  Parameter x("x", random_tensor(rng, {5}));
  const Tensor w = random_tensor(rng, {5});
  const double lambda = 0.7;
  auto build = [&](Tape& t) { return weighted_sum(t, gradient_reversal(tanh(t.param(x)), lambda), w); };
  x.zero_grad();
  {
    Tape t;
    t.backward(build(t));
  }
  Tensor expected = numeric_gradient(x, build);
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] *= -lambda;
  prim = std::max(prim, relative_error(x.grad, expected));

  double full = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    full = std::max(full, full_model_gradient_error(seed));
    full = std::max(full, full_model_gradient_error(seed, MaskMode::kScaleByWeight));
  }
  const double secs = seconds_since(start);
  return {prim < 1e-4 && full < 1e-3 && secs < 10.0,
          fmt("primitive max rel err %.2e, full model %.2e, %.2f s", prim, full, secs)};
}

Outcome barrier() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) worst = std::max(worst, barrier_deviation(seed));
  return {worst <= 1e-12, fmt("max relative deviation %.2e over 10 batches", worst)};
}

Outcome beam_oracle() {
  const auto start = Clock::now();
  int agree = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) agree += beam_matches_enumeration(seed);
  const double secs = seconds_since(start);
  return {agree == 50 && secs < 30.0, fmt("%d/50 models agree, %.2f s", agree, secs)};
}

Outcome metric_oracle() {
  Corpus gold;
  gold.documents.push_back({"d", "review", {make_sentence(12, {{0, 2, "T1"}, {5, 7, "T2"}})}});
  const PredictionSet pred{{"d#0", {{"T1", 0, 2}, {"T3", 5, 7}, {"T1", 9, 10}}}};
  const EvalReport r = score(gold, pred);
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  const auto& id = r.overall.identification;
  const auto& cl = r.overall.classification;
  const bool hand = near(id.precision, 2.0 / 3.0) && id.recall == 1.0 && near(id.f1, 0.8) &&
                    near(cl.precision, 1.0 / 3.0) && cl.recall == 0.5 && near(cl.f1, 0.4);
  Rng rng = make_substream(21, "metrics");
  int agree = 0;
  for (int i = 0; i < 200; ++i) agree += scorer_matches_brute_force(random_case(rng));
  return {hand && agree == 200,
          fmt("hand example %s; id P=%.4f R=%.4f F1=%.4f cls P=%.4f R=%.4f F1=%.4f; brute force %d/200",
              hand ? "ok" : "wrong", id.precision, id.recall, id.f1, cl.precision, cl.recall, cl.f1, agree)};
}

Outcome statistics_oracles() {
  std::vector<std::string> a, b;
  auto push = [&](const char* x, const char* y, int n) {
    for (int i = 0; i < n; ++i) a.push_back(x), b.push_back(y);
  };
  push("A", "A", 20);
  push("A", "B", 5);
  push("B", "A", 10);
  push("B", "B", 15);
  const double kappa = cohen_kappa(a, b);
  const double kappa_same = cohen_kappa(a, a);

  const EventSchema two({"T1", "T2"});
  Corpus extreme;
  extreme.documents.push_back({"a", "review", {make_sentence(3, {{0, 1, "T1"}})}});
  extreme.documents.push_back({"b", "phone_conv", {make_sentence(3, {{0, 1, "T2"}})}});
  Corpus equal;
  equal.documents.push_back({"a", "review", {make_sentence(3, {{0, 1, "T1"}, {1, 2, "T2"}})}});
  equal.documents.push_back({"b", "phone_conv", {make_sentence(3, {{0, 1, "T2"}, {2, 3, "T1"}})}});
  const double w_extreme = average_wasserstein(extreme, two);
  const double w_equal = average_wasserstein(equal, two);
  const bool ok = std::abs(kappa - 0.4) <= 1e-12 && kappa_same == 1.0 && w_extreme == 0.5 && w_equal == 0.0;
  return {ok, fmt("kappa %.15g, identical kappa %.17g, W %.17g, identical W %.17g", kappa, kappa_same,
                  w_extreme, w_equal)};
}

struct Learnability {
  double classification_f1 = 0.0;
  double identification_f1 = 0.0;
  double threshold = 0.0;
  double seconds = 0.0;
  EventCountReport buckets;
  std::size_t eventless = 0, eventless_empty = 0, single = 0, single_one_pair = 0;
};

Learnability train_synthetic() {
  const auto start = Clock::now();
  const EventSchema schema = EventSchema::food_safety();
  const SynthSpec spec = default_synth_spec(schema, 400);
  const SyntheticCorpus syn = generate_synthetic_corpus(7, spec, schema);
  const CorpusSplits splits = apply_split(syn.corpus, split_corpus(syn.corpus, 7));

  TrainConfig tc;
  TracingModel model(ModelConfig{}, schema, Vocabulary::from_corpus(splits.train), 7);
  train(model, splits.train, splits.dev, tc);
  const BeamConfig beam;
  Learnability out;
  out.threshold = tune_threshold(model, splits.dev, MatchMode::kClassification, beam).best;
  const auto predictions = predict_corpus(model, splits.test, beam, out.threshold);
  const PredictionSet set = to_prediction_set(predictions);
  const EvalReport report = score(splits.test, set);
  out.classification_f1 = report.overall.classification.f1;
  out.identification_f1 = report.overall.identification.f1;
  out.buckets = score_by_event_count(splits.test, set);
  for (const auto& doc : splits.test.documents) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const auto it = set.find(sentence_id(doc.id, i));
      const std::size_t n = it == set.end() ? 0 : it->second.size();
      const std::size_t gold = doc.sentences[i].mentions.size();
      if (gold == 0) ++out.eventless, out.eventless_empty += n == 0;
      if (gold == 1) ++out.single, out.single_one_pair += n == 1;
    }
  }
  out.seconds = seconds_since(start);
  return out;
}

Outcome learnability(const Learnability& l) {
  const bool ok = l.classification_f1 >= 0.90 && l.identification_f1 >= 0.92 && l.seconds < 600.0;
  return {ok, fmt("classification F1 %.4f, identification F1 %.4f, tuned threshold %.1f, %.0f s; "
                  "event-less sentences with no prediction %zu/%zu, single-event sentences with one pair %zu/%zu",
                  l.classification_f1, l.identification_f1, l.threshold, l.seconds, l.eventless_empty,
                  l.eventless, l.single_one_pair, l.single)};
}

Outcome teacher_forcing() {
  const Tensor prelim = Tensor::vector({0.1, 0.5, 0.3, 0.1});
  Rng rng = make_substream(7, "teacher_forcing");
  int gold = 0;
  for (int i = 0; i < 10000; ++i) gold += trace_mask(prelim, 2, 0.8, &rng).used_gold;
  bool degenerate = true;
  for (int i = 0; i < 1000; ++i) {
    const TraceMask one = trace_mask(prelim, 2, 1.0, &rng);
    const TraceMask zero = trace_mask(prelim, 2, 0.0, &rng);
    degenerate &= one.used_gold && one.selected == 2 && !zero.used_gold && zero.selected == 1;
  }
  const double freq = gold / 10000.0;
  return {freq >= 0.78 && freq <= 0.82 && degenerate,
          fmt("gold-pick frequency %.4f at rho 0.8; rho 0/1 degenerate %s", freq, degenerate ? "yes" : "no")};
}

Outcome multi_event(const Learnability& l) {
  const double single = l.buckets.single.classification.f1;
  const double multiple = l.buckets.multiple.classification.f1;
  return {single >= multiple,
          fmt("1/1 classification F1 %.4f (%zu sentences), 1/N classification F1 %.4f (%zu sentences); "
              "identification %.4f vs %.4f",
              single, l.buckets.single_sentences, multiple, l.buckets.multiple_sentences,
              l.buckets.single.identification.f1, l.buckets.multiple.identification.f1)};
}

CorpusSplits small_splits(std::uint64_t seed, std::size_t docs) {
  const EventSchema schema = EventSchema::food_safety();
  const SyntheticCorpus syn = generate_synthetic_corpus(seed, default_synth_spec(schema, docs), schema);
  return apply_split(syn.corpus, split_corpus(syn.corpus, seed));
}

ModelConfig small_model() {
  ModelConfig c;
  c.embedding_dim = c.hidden_dim = c.decoder_dim = c.label_embedding_dim = 6;
  return c;
}

Outcome strategy_sanity() {
  const EventSchema schema = EventSchema::food_safety();
  auto model_for = [&](const TrainingPlan& plan) {
    return TracingModel(configure_model(small_model(), plan), schema, Vocabulary::from_corpus(plan.data.train), 1);
  };

  // PD on a single-domain corpus versus SD.
  CorpusSplits single = small_splits(8, 12);
  for (Corpus* c : {&single.train, &single.dev, &single.test}) {
    Corpus only;
    for (const auto& d : c->documents)
      if (d.domain == "review") only.documents.push_back(d);
    *c = only;
  }
  StrategyConfig pd_cfg, sd_cfg;
  pd_cfg.strategy = Strategy::kPD;
  sd_cfg.strategy = Strategy::kSD;
  sd_cfg.domains = {"review"};
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  const TrainingPlan pd = apply_strategy(single, pd_cfg);
  const TrainingPlan sd = apply_strategy(single, sd_cfg);
  TracingModel mp = model_for(pd), ms = model_for(sd);
  const std::string log_pd = format_loss_log(train(mp, pd.data.train, pd.data.dev, tc));
  const std::string log_sd = format_loss_log(train(ms, sd.data.train, sd.data.dev, tc));
  const bool pd_sd = !log_pd.empty() && log_pd == log_sd;

  // MDSP: a review-only batch touches only the review private transform.
  const CorpusSplits multi = small_splits(4, 10);
  StrategyConfig mdsp_cfg;
  mdsp_cfg.strategy = Strategy::kMDSP;
  const TrainingPlan mdsp = apply_strategy(multi, mdsp_cfg);
  TracingModel mm = model_for(mdsp);
  Corpus review;
  for (const auto& d : multi.train.documents)
    if (d.domain == "review") review.documents.push_back(d);
  mm.params().zero_grad();
  {
    Tape tape;
    Rng rng = make_substream(4, "tf");
    LossGraph g = compute_losses(tape, mm, make_examples(review, mm), {}, 0.9, rng);
    const auto terms = g.terms();
    tape.backward(terms);
  }
  bool isolated = true;
  const auto& heads = *mm.heads();
  for (std::size_t d = 0; d < mm.config().domains.size(); ++d) {
    bool zero = true;
    for (const Parameter* p : {heads.private_weight[d], heads.private_bias[d]})
      for (double v : p->grad.values()) zero &= v == 0.0;
    isolated &= (d == mm.domain_index("review")) ? !zero : zero;
  }

  // Gradient reversal: identity forward, sign-flipped backward against
  // finite differences of the composed domain loss.
  StrategyConfig ada_cfg;
  ada_cfg.strategy = Strategy::kADA;
  ada_cfg.domains = {"review", "phone_conv"};
  const TrainingPlan ada = apply_strategy(multi, ada_cfg);
  TracingModel ma = model_for(ada);
  const auto ids = ma.vocab().encode(multi.train.documents[0].sentences[0].tokens);
  auto pooled = [&](Tape& t) { return pooled_features(t, encode(t, ma.encoder(), ids)); };
  bool identity = false;
  {
    Tape t;
    Var p = pooled(t);
    const Tensor before = p.value();
    identity = gradient_reversal(p, 0.5).value() == before;
  }
  Parameter& fwd = *ma.encoder().forward.weight;
  ma.params().zero_grad();
  {
    Tape t;
    t.backward(domain_aux_loss(t, ma, pooled(t), 0, 0.5));
  }
  Tensor expected = numeric_gradient(fwd, [&](Tape& t) { return domain_aux_loss(t, ma, pooled(t), 0, 0.5); });
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] *= -0.5;
  const double grl_err = relative_error(fwd.grad, expected);

  return {pd_sd && isolated && identity && grl_err < 1e-4,
          fmt("PD==SD logs %s; MDSP isolation %s; reversal forward identity %s, backward rel err %.2e",
              pd_sd ? "yes" : "no", isolated ? "yes" : "no", identity ? "yes" : "no", grl_err)};
}

Outcome determinism() {
  const CorpusSplits splits = small_splits(1, 10);
  const EventSchema schema = EventSchema::food_safety();
  ModelConfig mc = small_model();
  TrainConfig tc;
  tc.epochs = 3;
  tc.augment_ratio = 0.3;
  auto run = [&] {
    TracingModel m(mc, schema, Vocabulary::from_corpus(splits.train), 1);
    std::string log = format_loss_log(train(m, splits.train, splits.dev, tc));
    return std::pair{std::move(log), std::move(m)};
  };
  auto [log_a, model_a] = run();
  auto [log_b, model_b] = run();
  const bool logs = log_a == log_b;

  ScratchDir dir("acceptance");
  save_checkpoint(dir.path() / "m.ckpt", model_a, {{"epochs", "3"}});
  const LoadedCheckpoint loaded = load_checkpoint(dir.path() / "m.ckpt");
  bool ckpt = loaded.model.params().snapshot() == model_a.params().snapshot() &&
              loaded.model.vocab() == model_a.vocab() && loaded.echo.at("epochs") == "3";
  save_checkpoint(dir.path() / "again.ckpt", loaded.model, loaded.echo);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  ckpt &= slurp(dir.path() / "m.ckpt") == slurp(dir.path() / "again.ckpt");

  const SyntheticCorpus syn = generate_synthetic_corpus(5, default_synth_spec(schema, 10), schema);
  save_corpus(dir.path() / "c.jsonl", syn.corpus);
  const Corpus back = load_corpus(dir.path() / "c.jsonl", schema);
  save_corpus(dir.path() / "c2.jsonl", back);
  const bool corpus = back == syn.corpus && slurp(dir.path() / "c.jsonl") == slurp(dir.path() / "c2.jsonl");

  return {logs && ckpt && corpus, fmt("loss logs identical %s; checkpoint round trip %s; corpus round trip %s",
                                      logs ? "yes" : "no", ckpt ? "yes" : "no", corpus ? "yes" : "no")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("criterion %2d %-28s %s  %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "gradient correctness", guarded(gradient_correctness));
  report(2, "attention barrier", guarded(barrier));
  report(3, "beam oracle", guarded(beam_oracle));
  report(4, "metric oracle", guarded(metric_oracle));
  report(5, "statistics oracles", guarded(statistics_oracles));
  Learnability trained;
  std::string train_error;
  try {
    trained = train_synthetic();
  } catch (const std::exception& e) {
    train_error = e.what();
  }
  report(6, "synthetic learnability",
         train_error.empty() ? learnability(trained) : Outcome{false, "exception: " + train_error});
  report(7, "teacher forcing statistics", guarded(teacher_forcing));
  report(8, "multi-event trend",
         train_error.empty() ? multi_event(trained) : Outcome{false, "exception: " + train_error});
  report(9, "strategy sanity", guarded(strategy_sanity));
  report(10, "determinism and round trips", guarded(determinism));
  return failures == 0 ? 0 : 1;
}
