#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "evtrace/analysis.hpp"
#include "evtrace/corpus.hpp"
#include "evtrace/inference.hpp"
#include "evtrace/metrics.hpp"
#include "evtrace/model.hpp"
#include "evtrace/strategies.hpp"
#include "evtrace/synth.hpp"
#include "evtrace/trainer.hpp"
#include "evtrace/uda.hpp"
#include "report.hpp"

namespace evtrace::cli {
namespace {

EventSchema load_schema(const std::string& path) {
  if (path.empty()) return EventSchema::food_safety();
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot read schema " + path, {"schema"});
  std::vector<std::string> types;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) types.push_back(line);
  }
  return EventSchema(std::move(types));
}

const Corpus& pick_part(const CorpusSplits& splits, const std::string& part) {
  if (part == "train") return splits.train;
  if (part == "dev") return splits.dev;
  return splits.test;
}

/// The whole corpus when no manifest is given, else one split of it.
Corpus load_part(const std::string& corpus_path, const std::string& split_path,
                 const std::string& part, const EventSchema& schema) {
  Corpus corpus = load_corpus(corpus_path, schema);
  if (split_path.empty()) return corpus;
  return pick_part(apply_split(corpus, load_manifest(split_path)), part);
}

ConfigEcho echo_of(const std::string& resolved) {
  Report parsed("echo");
  parsed.add_config(resolved);
  ConfigEcho echo;
  std::istringstream in(parsed.str());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return echo;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("io", "cannot write " + path);
  out << text;
}

BeamConfig beam_of(std::size_t width, std::size_t max_length) { return {width, max_length}; }

void add_losses(Report& r, const std::string& prefix, const LossBreakdown& l) {
  r.add(prefix + ".generation", l.generation);
  r.add(prefix + ".attention", l.attention);
  r.add(prefix + ".bag_of_labels", l.bag_of_labels);
  r.add(prefix + ".domain", l.domain);
  r.add(prefix + ".total", l.total);
}

void add_eval_blocks(Report& r, const std::string& prefix, const EvalReport& e) {
  r.section(prefix + "overall");
  r.add_scores(e.overall);
  for (const auto& [domain, s] : e.per_domain) {
    r.section(prefix + "domain." + domain);
    r.add_scores(s);
  }
  for (const auto& [type, s] : e.per_type) {
    r.section(prefix + "type." + type);
    r.add_prf("classification", s.classification);
  }
}

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string join(const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(format_double(v));
  return join(parts);
}

}  // namespace

void run_synth(const Options& opts, const std::string& /*resolved*/) {
  const auto& o = opts.synth;
  const EventSchema schema = load_schema(o.schema);
  SynthSpec spec = default_synth_spec(schema, o.docs_per_domain);
  spec.multi_event_proportion = o.multi_event;
  spec.lexemes_per_type = o.lexemes_per_type;
  spec.multi_token_lexeme_rate = o.multi_token_rate;
  spec.domain_distractor_vocab_size = o.domain_distractor_vocab;
  spec.domain_distractor_rate = o.domain_distractor_rate;
  const SyntheticCorpus synth = generate_synthetic_corpus(opts.seed, spec, schema);
  save_corpus(o.out, synth.corpus);
  if (!o.lexicon_out.empty()) {
    nlohmann::json lex = nlohmann::json::object();
    for (std::size_t t = 0; t < schema.type_count(); ++t) lex[schema.types()[t]] = synth.lexicon[t];
    write_text(o.lexicon_out, lex.dump(1) + "\n");
  }
}

void run_split(const Options& opts, const std::string& /*resolved*/) {
  const auto& o = opts.split;
  const Corpus corpus = load_corpus(o.corpus, load_schema(o.schema));
  save_manifest(o.out, split_corpus(corpus, opts.seed));
}

void run_train(const Options& opts, const std::string& resolved) {
  const auto& o = opts.train;
  const EventSchema schema = load_schema(o.schema);
  const Corpus corpus = load_corpus(o.corpus, schema);
  const CorpusSplits splits = apply_split(corpus, load_manifest(o.split));

  ModelConfig model_cfg;
  model_cfg.embedding_dim = o.embedding_dim;
  model_cfg.hidden_dim = o.hidden_dim;
  model_cfg.decoder_dim = o.decoder_dim;
  model_cfg.label_embedding_dim = o.label_embedding_dim;
  model_cfg.mask_mode = parse_mask_mode(o.mask_mode);

  TrainConfig train_cfg;
  train_cfg.epochs = o.epochs;
  train_cfg.batch_size = o.batch_size;
  train_cfg.optimizer.rule = o.optimizer == "sgd" ? UpdateRule::kSgd : UpdateRule::kAdam;
  train_cfg.optimizer.learning_rate = o.learning_rate;
  train_cfg.optimizer.clip_norm = o.clip_norm;
  train_cfg.rho = o.rho;
  train_cfg.weights.attention = o.alpha;
  train_cfg.weights.bag_of_labels = o.beta;
  train_cfg.seed = opts.seed;
  train_cfg.augment_ratio = o.augment_ratio;
  train_cfg.max_sentence_length = o.max_sentence_length;

  StrategyConfig strategy;
  strategy.strategy = parse_strategy(o.strategy);
  strategy.domains = o.domains;
  strategy.domain_loss_weight = o.domain_weight;
  strategy.reversal_coefficient = o.reversal;
  strategy.shared_dim = o.shared_dim;
  strategy.private_dim = o.private_dim;
  strategy.sum_shared_private = o.mdsp_sum;

  ConfigEcho echo = echo_of(resolved);

  if (strategy.strategy == Strategy::kADA) {
    UdaConfig uda;
    uda.schema = schema;
    uda.model = model_cfg;
    uda.train = train_cfg;
    uda.strategy = strategy;
    uda.beam = beam_of(o.beam_width, o.max_length);
    uda.tune_mode = parse_match_mode(o.tune_mode);
    const UdaResult result = run_uda(splits, uda);
    echo["threshold"] = format_double(result.threshold);
    save_checkpoint(o.checkpoint, result.model, echo);
    write_text(o.loss_log, format_loss_log(result.log));

    Report report("evtrace domain adaptation report");
    report.section("adaptation");
    report.add("source", strategy.domains.at(0));
    report.add("target", strategy.domains.at(1));
    report.add("threshold", result.threshold);
    add_eval_blocks(report, "in_domain.", result.in_domain);
    add_eval_blocks(report, "out_of_domain.", result.out_of_domain);
    report.section("trend");
    for (const auto& e : result.trend) {
      const std::string p = "epoch." + std::to_string(e.epoch);
      report.add(p + ".train_total", e.train.total);
      report.add(p + ".train_domain", e.train.domain);
      report.add(p + ".domain_accuracy", e.domain_accuracy);
    }
    report.add_config(resolved);
    report.write(o.report);
    return;
  }

  const TrainingPlan plan = apply_strategy(splits, strategy);
  train_cfg.weights.domain = plan.domain_loss_weight;
  train_cfg.reversal_coefficient = plan.reversal_coefficient;
  TracingModel model(configure_model(model_cfg, plan), schema,
                     Vocabulary::from_corpus(plan.data.train), opts.seed);
  const TrainResult log = train(model, plan.data.train, plan.data.dev, train_cfg);
  save_checkpoint(o.checkpoint, model, echo);
  write_text(o.loss_log, format_loss_log(log));

  if (!o.report.empty()) {
    Report report("evtrace training report");
    report.section("training");
    report.add("epochs", log.epochs.size());
    report.add("train_documents", plan.data.train.documents.size());
    report.add("dev_documents", plan.data.dev.documents.size());
    if (!log.epochs.empty()) {
      add_losses(report, "final.train", log.epochs.back().train);
      if (log.epochs.back().dev) add_losses(report, "final.dev", *log.epochs.back().dev);
    }
    report.add_config(resolved);
    report.write(o.report);
  }
}

void run_tune(const Options& opts, const std::string& resolved) {
  const auto& o = opts.tune;
  const LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
  const Corpus dev = load_part(o.corpus, o.split, o.part, ckpt.model.schema());
  const ThresholdScan scan =
      tune_threshold(ckpt.model, dev, parse_match_mode(o.mode), beam_of(o.beam_width, o.max_length));

  const std::string fragment = "[predict]\nthreshold = " + format_double(scan.best) + "\n";
  if (o.out.empty()) {
    std::cout << fragment;
  } else {
    write_text(o.out, fragment);
  }
  if (!o.report.empty()) {
    Report report("evtrace threshold report");
    report.section("threshold");
    report.add("best", scan.best);
    for (std::size_t i = 0; i < kThresholdGrid.size(); ++i)
      report.add("f1." + format_double(kThresholdGrid[i]), scan.f1[i]);
    report.add_config(resolved);
    report.write(o.report);
  }
}

void run_predict(const Options& opts, const std::string& /*resolved*/) {
  const auto& o = opts.predict;
  const LoadedCheckpoint ckpt = load_checkpoint(o.checkpoint);
  const EventSchema& schema = ckpt.model.schema();
  const BeamConfig beam = beam_of(o.beam_width, o.max_length);

  double threshold = 0.0;
  if (o.threshold == "tune") {
    const Corpus dev = load_part(o.corpus, o.split, o.tune_part, schema);
    threshold = tune_threshold(ckpt.model, dev, parse_match_mode(o.tune_mode), beam).best;
  } else {
    threshold = std::stod(o.threshold);
  }
  const Corpus target = load_part(o.corpus, o.split, o.part, schema);
  save_predictions(o.out, predict_corpus(ckpt.model, target, beam, threshold));
  std::cout << "threshold = " << format_double(threshold) << "\n";
}

void run_eval(const Options& opts, const std::string& resolved) {
  const auto& o = opts.eval;
  const Corpus gold = load_part(o.gold, o.split, o.part, load_schema(o.schema));
  const PredictionSet predictions = to_prediction_set(load_predictions(o.predictions));
  const EvalReport scores = score(gold, predictions);
  const EventCountReport buckets = score_by_event_count(gold, predictions);

  Report report("evtrace evaluation report");
  report.section("corpus");
  report.add("documents", gold.documents.size());
  report.add("sentences", gold.sentence_count());
  report.add("mentions", gold.mention_count());
  add_eval_blocks(report, "", scores);
  report.section("bucket.1/1");
  report.add("sentences", buckets.single_sentences);
  report.add_scores(buckets.single);
  report.section("bucket.1/N");
  report.add("sentences", buckets.multiple_sentences);
  report.add_scores(buckets.multiple);
  report.add_config(resolved);
  report.write(o.out);
}

void run_analyze(const Options& opts, const std::string& resolved) {
  const auto& o = opts.analyze;
  const EventSchema schema = load_schema(o.schema);
  const Corpus corpus = load_corpus(o.corpus, schema);

  Report report("evtrace corpus analysis");
  report.section("heterogeneity");
  if (corpus.domains().size() >= 2) {
    const HeterogeneityReport h = heterogeneity(corpus, schema);
    report.add("domains", join(h.domains));
    for (std::size_t i = 0; i < h.domains.size(); ++i) {
      report.add("distribution." + h.domains[i], join(h.distributions[i]));
      report.add("event_density." + h.domains[i], h.event_density[i]);
    }
    for (std::size_t i = 0; i < h.domains.size(); ++i)
      for (std::size_t j = i + 1; j < h.domains.size(); ++j)
        report.add("wasserstein." + h.domains[i] + "." + h.domains[j], h.pairwise[i][j]);
    report.add("average_wasserstein", h.average_wasserstein);
    report.add("event_density_std", h.event_density_std);
  } else {
    report.add("available", std::string("false"));
  }

  const CorpusStats s = corpus_stats(corpus);
  report.section("stats");
  report.add("trigger_length.1-2", s.trigger_length_histogram[0]);
  report.add("trigger_length.3-4", s.trigger_length_histogram[1]);
  report.add("trigger_length.5+", s.trigger_length_histogram[2]);
  report.add("sentences", s.sentences);
  report.add("evented_sentences", s.evented_sentences);
  report.add("multi_event_sentences", s.multi_event_sentences);
  report.add("multi_event_proportion", s.multi_event_proportion);
  report.add("multi_event_proportion_all", s.multi_event_proportion_all);
  for (const auto& [d, v] : s.event_density) report.add("event_density." + d, v);
  report.add("event_density_std", s.event_density_std);
  for (const auto& [d, v] : s.mean_sentence_length) report.add("mean_sentence_length." + d, v);
  report.add("sentence_length_std", s.sentence_length_std);

  if (!o.segmentation.empty()) {
    const MismatchStats m = word_trigger_mismatch(corpus, load_segmentation(o.segmentation));
    report.section("word_trigger_mismatch");
    report.add("cross_word", m.cross_word);
    report.add("inside_word", m.inside_word);
    report.add("regular", m.regular);
    report.add("cross_word_pct", m.cross_word_pct);
    report.add("inside_word_pct", m.inside_word_pct);
    report.add("regular_pct", m.regular_pct);
  }
  if (!o.annotations.empty()) {
    const auto [a, b] = load_paired_annotations(o.annotations);
    report.section("agreement");
    report.add("items", a.size());
    try {
      report.add("kappa", cohen_kappa(a, b));
    } catch (const std::domain_error&) {
      report.add("kappa", std::string("undefined"));
    }
  }
  report.add_config(resolved);
  report.write(o.out);
}

}  // namespace evtrace::cli
