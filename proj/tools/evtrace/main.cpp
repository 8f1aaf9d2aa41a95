// evtrace command-line entry point.
//
// Every option can also come from an INI file given with --config: root keys
// (seed) before any section, command keys under [synth], [train], etc. Flags
// on the command line override file values.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "errors.hpp"
#include "evtrace/corpus.hpp"
#include "evtrace/trainer.hpp"
#include "options.hpp"

namespace fs = std::filesystem;
using namespace evtrace::cli;

namespace {

void emit_error(const std::string& kind, const std::string& message,
                const std::vector<std::string>& keys) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"keys", keys}};
  std::cerr << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << std::endl;
}

bool is_plumbing(const CLI::Option* opt) {
  const std::string n = opt->get_single_name();
  return n == "help" || n == "config";
}

/// Every config-file key with no matching option (CLI11 stops at the first).
std::vector<std::string> unknown_config_keys(const CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> unknown;
  if (!in) return unknown;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    const CLI::App* scope = &app;
    bool found = true;
    for (const auto& parent : item.parents) {
      scope = const_cast<CLI::App*>(scope)->get_subcommand_no_throw(parent);
      if (scope == nullptr) {
        found = false;
        break;
      }
    }
    if (found) found = scope->get_option_no_throw("--" + item.name) != nullptr;
    if (!found) unknown.push_back(item.fullname());
  }
  return unknown;
}

/// Option names quoted in a CLI11 parse error, as config keys.
std::vector<std::string> keys_in_message(const std::string& message) {
  static const std::regex flag("--([a-z][a-z0-9-]*)");
  std::vector<std::string> keys;
  for (std::sregex_iterator it(message.begin(), message.end(), flag), end; it != end; ++it)
    keys.push_back((*it)[1]);
  return keys;
}

/// Effective configuration of the invoked command in config-file form.
std::string resolved_config(const CLI::App& app, const CLI::App& sub) {
  auto dump = [](const CLI::App& scope, std::ostringstream& out) {
    for (const CLI::Option* opt : scope.get_options()) {
      if (is_plumbing(opt)) continue;
      std::string value;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
      } else {
        value = opt->get_default_str();
      }
      if (value.empty() || value == "{}") value = "\"\"";
      out << opt->get_single_name() << " = " << value << "\n";
    }
  };
  std::ostringstream out;
  dump(app, out);
  out << "[" << sub.get_name() << "]\n";
  dump(sub, out);
  return out.str();
}

// Collects every offending key for the invoked command before any work runs.
class Validator {
 public:
  explicit Validator(std::string section) : section_(std::move(section)) {}

  void require(const std::string& key, const std::string& value) {
    if (value.empty()) missing_.push_back(qualify(key));
  }
  void positive(const std::string& key, std::size_t v) {
    if (v == 0) invalid(key);
  }
  void positive(const std::string& key, double v) {
    if (!(v > 0.0)) invalid(key);
  }
  void non_negative(const std::string& key, double v) {
    if (!(v >= 0.0)) invalid(key);
  }
  void unit(const std::string& key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) invalid(key);
  }
  void one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
      if (v == a) return;
    invalid(key);
  }
  void threshold(const std::string& key, const std::string& v) {
    if (v == "tune") return;
    try {
      std::size_t used = 0;
      const double t = std::stod(v, &used);
      if (used == v.size() && t > 0.0 && t < 1.0) return;
    } catch (const std::exception&) {
    }
    invalid(key);
  }
  void invalid(const std::string& key) { invalid_.push_back(qualify(key)); }

  /// Outputs must differ from each other and from every input.
  void paths(const std::vector<std::pair<std::string, std::string>>& inputs,
             const std::vector<std::pair<std::string, std::string>>& outputs) {
    auto norm = [](const std::string& p) { return fs::weakly_canonical(fs::absolute(p)).string(); };
    std::set<std::string> flagged;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (outputs[i].second.empty()) continue;
      const std::string out = norm(outputs[i].second);
      for (const auto& [key, path] : inputs)
        if (!path.empty() && norm(path) == out) flagged.insert(key), flagged.insert(outputs[i].first);
      for (std::size_t j = i + 1; j < outputs.size(); ++j)
        if (!outputs[j].second.empty() && norm(outputs[j].second) == out)
          flagged.insert(outputs[i].first), flagged.insert(outputs[j].first);
    }
    for (const auto& k : flagged) conflicting_.push_back(qualify(k));
  }

  void raise() const {
    if (!missing_.empty()) throw CliError("missing_keys", "required keys not set", missing_);
    if (!invalid_.empty()) throw CliError("invalid_keys", "keys with out-of-range values", invalid_);
    if (!conflicting_.empty())
      throw CliError("conflicting_paths", "output paths collide with other paths", conflicting_);
  }

 private:
  std::string qualify(const std::string& key) const { return section_ + "." + key; }

  std::string section_;
  std::vector<std::string> missing_, invalid_, conflicting_;
};

void validate(const Options& opts, const std::string& command) {
  Validator v(command);
  if (command == "synth") {
    const auto& o = opts.synth;
    v.require("out", o.out);
    v.positive("docs-per-domain", o.docs_per_domain);
    v.unit("multi-event", o.multi_event);
    v.positive("lexemes-per-type", o.lexemes_per_type);
    v.unit("multi-token-rate", o.multi_token_rate);
    v.unit("domain-distractor-rate", o.domain_distractor_rate);
    v.paths({{"schema", o.schema}}, {{"out", o.out}, {"lexicon-out", o.lexicon_out}});
  } else if (command == "split") {
    const auto& o = opts.split;
    v.require("corpus", o.corpus);
    v.require("out", o.out);
    v.paths({{"corpus", o.corpus}, {"schema", o.schema}}, {{"out", o.out}});
  } else if (command == "train") {
    const auto& o = opts.train;
    v.require("corpus", o.corpus);
    v.require("split", o.split);
    v.require("checkpoint", o.checkpoint);
    v.require("loss-log", o.loss_log);
    if (o.strategy == "ADA") v.require("report", o.report);
    v.positive("embedding-dim", o.embedding_dim);
    v.positive("hidden-dim", o.hidden_dim);
    v.positive("decoder-dim", o.decoder_dim);
    v.positive("label-embedding-dim", o.label_embedding_dim);
    v.one_of("mask-mode", o.mask_mode, {"select", "scale"});
    v.positive("epochs", o.epochs);
    v.positive("batch-size", o.batch_size);
    v.one_of("optimizer", o.optimizer, {"sgd", "adam"});
    v.positive("learning-rate", o.learning_rate);
    v.non_negative("clip-norm", o.clip_norm);
    v.unit("rho", o.rho);
    v.non_negative("alpha", o.alpha);
    v.non_negative("beta", o.beta);
    v.non_negative("augment-ratio", o.augment_ratio);
    v.positive("max-sentence-length", o.max_sentence_length);
    v.one_of("strategy", o.strategy, {"SD", "PD", "PDMT", "MDSP", "ADA"});
    if (o.strategy == "SD" && o.domains.size() != 1) v.invalid("domains");
    if (o.strategy == "ADA" && o.domains.size() != 2) v.invalid("domains");
    v.non_negative("domain-weight", o.domain_weight);
    v.non_negative("reversal", o.reversal);
    v.positive("shared-dim", o.shared_dim);
    v.positive("private-dim", o.private_dim);
    if (o.mdsp_sum && o.shared_dim != o.private_dim) v.invalid("mdsp-sum");
    v.positive("beam-width", o.beam_width);
    v.positive("max-length", o.max_length);
    v.one_of("tune-mode", o.tune_mode, {"identification", "classification"});
    v.paths({{"corpus", o.corpus}, {"split", o.split}, {"schema", o.schema}},
            {{"checkpoint", o.checkpoint}, {"loss-log", o.loss_log}, {"report", o.report}});
  } else if (command == "tune-threshold") {
    const auto& o = opts.tune;
    v.require("checkpoint", o.checkpoint);
    v.require("corpus", o.corpus);
    v.one_of("part", o.part, {"train", "dev", "test"});
    v.one_of("mode", o.mode, {"identification", "classification"});
    v.positive("beam-width", o.beam_width);
    v.positive("max-length", o.max_length);
    v.paths({{"checkpoint", o.checkpoint}, {"corpus", o.corpus}, {"split", o.split}},
            {{"out", o.out}, {"report", o.report}});
  } else if (command == "predict") {
    const auto& o = opts.predict;
    v.require("checkpoint", o.checkpoint);
    v.require("corpus", o.corpus);
    v.require("out", o.out);
    if (o.threshold == "tune") v.require("split", o.split);
    v.threshold("threshold", o.threshold);
    v.one_of("part", o.part, {"train", "dev", "test"});
    v.one_of("tune-part", o.tune_part, {"train", "dev", "test"});
    v.one_of("tune-mode", o.tune_mode, {"identification", "classification"});
    v.positive("beam-width", o.beam_width);
    v.positive("max-length", o.max_length);
    v.paths({{"checkpoint", o.checkpoint}, {"corpus", o.corpus}, {"split", o.split}}, {{"out", o.out}});
  } else if (command == "eval") {
    const auto& o = opts.eval;
    v.require("gold", o.gold);
    v.require("predictions", o.predictions);
    v.require("out", o.out);
    v.one_of("part", o.part, {"train", "dev", "test"});
    v.paths({{"gold", o.gold}, {"split", o.split}, {"schema", o.schema}, {"predictions", o.predictions}},
            {{"out", o.out}});
  } else if (command == "analyze") {
    const auto& o = opts.analyze;
    v.require("corpus", o.corpus);
    v.require("out", o.out);
    v.paths({{"corpus", o.corpus},
             {"schema", o.schema},
             {"segmentation", o.segmentation},
             {"annotations", o.annotations}},
            {{"out", o.out}});
  }
  v.raise();
}

void add_synth(CLI::App& app, SynthOptions& o) {
  auto* s = app.add_subcommand("synth", "Generate a synthetic multi-domain corpus");
  s->add_option("--out", o.out, "Corpus file to write (JSON lines)");
  s->add_option("--schema", o.schema, "Event types, one per line (default: food-safety set)");
  s->add_option("--lexicon-out", o.lexicon_out, "Also write the trigger lexicon as JSON");
  s->add_option("--docs-per-domain", o.docs_per_domain);
  s->add_option("--multi-event", o.multi_event, "Share of evented sentences with 2+ events");
  s->add_option("--lexemes-per-type", o.lexemes_per_type);
  s->add_option("--multi-token-rate", o.multi_token_rate);
  s->add_option("--domain-distractor-vocab", o.domain_distractor_vocab);
  s->add_option("--domain-distractor-rate", o.domain_distractor_rate);
}

void add_split(CLI::App& app, SplitOptions& o) {
  auto* s = app.add_subcommand("split", "Write an 8:1:1 document split manifest");
  s->add_option("--corpus", o.corpus);
  s->add_option("--schema", o.schema);
  s->add_option("--out", o.out, "Manifest file to write");
}

void add_train(CLI::App& app, TrainOptions& o) {
  auto* s = app.add_subcommand("train", "Train a tracing model; writes a checkpoint and loss log");
  s->add_option("--corpus", o.corpus);
  s->add_option("--split", o.split, "Split manifest");
  s->add_option("--schema", o.schema);
  s->add_option("--checkpoint", o.checkpoint, "Checkpoint file to write");
  s->add_option("--loss-log", o.loss_log, "Per-epoch TSV loss log to write");
  s->add_option("--report", o.report, "Report file (required for ADA)");
  s->add_option("--embedding-dim", o.embedding_dim);
  s->add_option("--hidden-dim", o.hidden_dim);
  s->add_option("--decoder-dim", o.decoder_dim);
  s->add_option("--label-embedding-dim", o.label_embedding_dim);
  s->add_option("--mask-mode", o.mask_mode, "select | scale");
  s->add_option("--epochs", o.epochs);
  s->add_option("--batch-size", o.batch_size);
  s->add_option("--optimizer", o.optimizer, "sgd | adam");
  s->add_option("--learning-rate", o.learning_rate);
  s->add_option("--clip-norm", o.clip_norm, "0 disables clipping");
  s->add_option("--rho", o.rho, "Teacher-forcing probability");
  s->add_option("--alpha", o.alpha, "Attention loss weight");
  s->add_option("--beta", o.beta, "Bag-of-labels loss weight");
  s->add_option("--augment-ratio", o.augment_ratio);
  s->add_option("--max-sentence-length", o.max_sentence_length);
  s->add_option("--strategy", o.strategy, "SD | PD | PDMT | MDSP | ADA");
  s->add_option("--domains", o.domains, "SD: the domain kept; ADA: source,target")->delimiter(',');
  s->add_option("--domain-weight", o.domain_weight);
  s->add_option("--reversal", o.reversal, "Gradient-reversal coefficient (ADA)");
  s->add_option("--shared-dim", o.shared_dim);
  s->add_option("--private-dim", o.private_dim);
  s->add_flag("--mdsp-sum", o.mdsp_sum, "Sum shared and private features instead of concatenating")
      ->default_str("false");
  s->add_option("--beam-width", o.beam_width);
  s->add_option("--max-length", o.max_length);
  s->add_option("--tune-mode", o.tune_mode);
}

void add_tune(CLI::App& app, TuneOptions& o) {
  auto* s = app.add_subcommand("tune-threshold", "Pick the attention threshold on a dev split");
  s->add_option("--checkpoint", o.checkpoint);
  s->add_option("--corpus", o.corpus);
  s->add_option("--split", o.split);
  s->add_option("--part", o.part, "train | dev | test");
  s->add_option("--mode", o.mode, "identification | classification");
  s->add_option("--beam-width", o.beam_width);
  s->add_option("--max-length", o.max_length);
  s->add_option("--out", o.out, "Config fragment to write (stdout when unset)");
  s->add_option("--report", o.report);
}

void add_predict(CLI::App& app, PredictOptions& o) {
  auto* s = app.add_subcommand("predict", "Predict typed trigger spans");
  s->add_option("--checkpoint", o.checkpoint);
  s->add_option("--corpus", o.corpus);
  s->add_option("--split", o.split);
  s->add_option("--part", o.part);
  s->add_option("--threshold", o.threshold, "A value in (0, 1) or \"tune\"");
  s->add_option("--tune-part", o.tune_part);
  s->add_option("--tune-mode", o.tune_mode);
  s->add_option("--beam-width", o.beam_width);
  s->add_option("--max-length", o.max_length);
  s->add_option("--out", o.out, "Prediction file to write (JSON lines)");
}

void add_eval(CLI::App& app, EvalOptions& o) {
  auto* s = app.add_subcommand("eval", "Score predictions against gold annotations");
  s->add_option("--gold", o.gold);
  s->add_option("--split", o.split);
  s->add_option("--part", o.part);
  s->add_option("--schema", o.schema);
  s->add_option("--predictions", o.predictions);
  s->add_option("--out", o.out, "Report file to write");
}

void add_analyze(CLI::App& app, AnalyzeOptions& o) {
  auto* s = app.add_subcommand("analyze", "Corpus statistics and cross-domain heterogeneity");
  s->add_option("--corpus", o.corpus);
  s->add_option("--schema", o.schema);
  s->add_option("--segmentation", o.segmentation, "Word segmentation, one line per sentence");
  s->add_option("--annotations", o.annotations, "Paired labels (tab-separated) for kappa");
  s->add_option("--out", o.out, "Report file to write");
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;
  CLI::App app{"evtrace: event detection with tracing attention"};
  app.option_defaults()->always_capture_default();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "INI file with one [section] per command");
  app.add_option("--seed", opts.seed, "Top-level seed for every random stream");
  app.require_subcommand(1);
  app.fallthrough();
  add_synth(app, opts.synth);
  add_split(app, opts.split);
  add_train(app, opts.train);
  add_tune(app, opts.tune);
  add_predict(app, opts.predict);
  add_eval(app, opts.eval);
  add_analyze(app, opts.analyze);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    auto keys = unknown_config_keys(app, app.get_config_ptr()->as<std::string>());
    if (keys.empty()) {
      emit_error("config", e.what(), keys);
    } else {
      emit_error("unknown_keys", "config file sets keys no command accepts", keys);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what(), keys_in_message(e.what()));
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    validate(opts, command);
    const std::string resolved = resolved_config(app, *sub);
    if (command == "synth") run_synth(opts, resolved);
    if (command == "split") run_split(opts, resolved);
    if (command == "train") run_train(opts, resolved);
    if (command == "tune-threshold") run_tune(opts, resolved);
    if (command == "predict") run_predict(opts, resolved);
    if (command == "eval") run_eval(opts, resolved);
    if (command == "analyze") run_analyze(opts, resolved);
  } catch (const CliError& e) {
    emit_error(e.kind(), e.what(), e.keys());
    return e.kind() == "io" ? 1 : 2;
  } catch (const evtrace::CorpusError& e) {
    emit_error("corpus", e.what(), {});
    return 1;
  } catch (const evtrace::TrainingDiverged& e) {
    emit_error("diverged", e.what(), {});
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what(), {});
    return 1;
  }
  return 0;
}
