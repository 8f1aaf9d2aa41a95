#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtrace/corpus.hpp"

namespace evtrace {

struct DomainProfile {
  std::string name;
  std::size_t num_docs = 100;
  /// Relative event-type frequencies in schema order; must sum to 1.
  std::vector<double> type_frequencies;
  /// Probability that a sentence carries at least one event.
  double event_sentence_rate = 0.6;
};

struct SynthSpec {
  std::vector<DomainProfile> domains;
  /// Among evented sentences, the share with two or more mentions.
  double multi_event_proportion = 0.35;
  std::size_t min_sentences_per_doc = 1;
  std::size_t max_sentences_per_doc = 3;
  std::size_t min_sentence_length = 6;
  std::size_t max_sentence_length = 14;
  std::size_t max_events_per_sentence = 3;
  std::size_t lexemes_per_type = 2;
  /// Probability that a lexeme spans 2 or 3 tokens instead of 1.
  double multi_token_lexeme_rate = 0.15;
  std::size_t trigger_vocab_size = 200;
  std::size_t shared_distractor_vocab_size = 150;
  /// Extra distractors private to each domain (a lexical shift between domains).
  std::size_t domain_distractor_vocab_size = 0;
  /// Share of distractor draws taken from the domain-private pool.
  double domain_distractor_rate = 0.0;
};

/// Zipf-like profile with exponent `skew`, rotated by `offset` so that
/// different domains favor different types.
std::vector<double> skewed_profile(std::size_t type_count, double skew, std::size_t offset);

/// Three-domain default (review / text_conv / phone_conv).
SynthSpec default_synth_spec(const EventSchema& schema, std::size_t docs_per_domain);

/// Lexicon assignment: lexemes[type][k] is a token sequence.
using TriggerLexicon = std::vector<std::vector<std::vector<std::string>>>;

struct SyntheticCorpus {
  Corpus corpus;
  TriggerLexicon lexicon;
};

/// Deterministic per seed. Throws CorpusError for infeasible specs.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SynthSpec& spec,
                                          const EventSchema& schema);

}  // namespace evtrace
