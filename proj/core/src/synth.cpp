#include "evtrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evtrace/random.hpp"

namespace evtrace {

std::vector<double> skewed_profile(std::size_t type_count, double skew, std::size_t offset) {
  std::vector<double> p(type_count);
  double total = 0.0;
  for (std::size_t r = 0; r < type_count; ++r) {
    const double w = 1.0 / std::pow(static_cast<double>(r + 1), skew);
    p[(r + offset) % type_count] = w;
    total += w;
  }
  for (double& v : p) v /= total;
  return p;
}

SynthSpec default_synth_spec(const EventSchema& schema, std::size_t docs_per_domain) {
  SynthSpec spec;
  const std::size_t m = schema.type_count();
  spec.domains = {
      {"review", docs_per_domain, skewed_profile(m, 0.6, 0), 0.7},
      {"text_conv", docs_per_domain, skewed_profile(m, 0.6, m / 3), 0.55},
      {"phone_conv", docs_per_domain, skewed_profile(m, 0.6, 2 * m / 3), 0.5},
  };
  return spec;
}

namespace {

void check_spec(const SynthSpec& spec, const EventSchema& schema) {
  if (spec.domains.empty()) throw CorpusError("synth: no domains");
  for (const auto& d : spec.domains) {
    if (d.name.empty()) throw CorpusError("synth: empty domain name");
    if (d.num_docs == 0) throw CorpusError("synth: domain '" + d.name + "' has no documents");
    if (d.type_frequencies.size() != schema.type_count()) {
      throw CorpusError("synth: domain '" + d.name + "' frequency profile has " +
                        std::to_string(d.type_frequencies.size()) + " entries, schema has " +
                        std::to_string(schema.type_count()));
    }
    double total = 0.0;
    for (double f : d.type_frequencies) {
      if (f < 0.0) throw CorpusError("synth: negative type frequency in '" + d.name + "'");
      total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw CorpusError("synth: type frequencies of '" + d.name + "' sum to " +
                        std::to_string(total));
    }
    if (d.event_sentence_rate < 0.0 || d.event_sentence_rate > 1.0) {
      throw CorpusError("synth: event sentence rate out of [0,1]");
    }
  }
  if (spec.multi_event_proportion < 0.0 || spec.multi_event_proportion > 1.0) {
    throw CorpusError("synth: multi-event proportion out of [0,1]");
  }
  if (spec.min_sentences_per_doc == 0 || spec.min_sentences_per_doc > spec.max_sentences_per_doc) {
    throw CorpusError("synth: invalid sentences-per-document range");
  }
  if (spec.min_sentence_length == 0 || spec.min_sentence_length > spec.max_sentence_length) {
    throw CorpusError("synth: invalid sentence-length range");
  }
  if (spec.max_events_per_sentence == 0 || spec.lexemes_per_type == 0) {
    throw CorpusError("synth: event and lexeme counts must be positive");
  }
  if (spec.multi_event_proportion > 0.0 && spec.max_events_per_sentence < 2) {
    throw CorpusError("synth: multi-event proportion needs max_events_per_sentence >= 2");
  }
  if (spec.shared_distractor_vocab_size == 0) throw CorpusError("synth: empty distractor vocabulary");
  // Worst case: every trigger is 3 tokens long with one separating token.
  if (spec.max_events_per_sentence * 4 > spec.max_sentence_length + 1) {
    throw CorpusError("synth: sentences too short for max_events_per_sentence triggers");
  }
}

std::size_t sample_categorical(Rng& rng, const std::vector<double>& weights) {
  double u = uniform(rng, 0.0, 1.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding residue: last type with nonzero weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

std::size_t sample_range(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SynthSpec& spec,
                                          const EventSchema& schema) {
  check_spec(spec, schema);
  Rng lex_rng = make_substream(seed, "synth.lexicon");
  Rng rng = make_substream(seed, "synth.corpus");

  // Lexeme lengths first, so feasibility is known before naming tokens.
  const std::size_t m = schema.type_count();
  std::vector<std::vector<std::size_t>> lengths(m);
  std::size_t needed = 0;
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t k = 0; k < spec.lexemes_per_type; ++k) {
      std::size_t len = 1;
      if (bernoulli(lex_rng, spec.multi_token_lexeme_rate)) len = 2 + uniform_index(lex_rng, 2);
      lengths[t].push_back(len);
      needed += len;
    }
  }
  if (needed > spec.trigger_vocab_size) {
    throw CorpusError("synth: lexicon needs " + std::to_string(needed) +
                      " trigger tokens but the trigger vocabulary has " +
                      std::to_string(spec.trigger_vocab_size));
  }
  std::vector<std::size_t> token_order(spec.trigger_vocab_size);
  std::iota(token_order.begin(), token_order.end(), 0);
  for (std::size_t i = token_order.size() - 1; i > 0; --i) {
    std::swap(token_order[i], token_order[uniform_index(lex_rng, i + 1)]);
  }
  TriggerLexicon lexicon(m);
  std::size_t next = 0;
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t len : lengths[t]) {
      std::vector<std::string> lexeme;
      for (std::size_t j = 0; j < len; ++j) lexeme.push_back("t" + std::to_string(token_order[next++]));
      lexicon[t].push_back(std::move(lexeme));
    }
  }

  SyntheticCorpus out;
  out.lexicon = lexicon;
  for (std::size_t di = 0; di < spec.domains.size(); ++di) {
    const DomainProfile& domain = spec.domains[di];
    auto distractor = [&]() -> std::string {
      if (spec.domain_distractor_vocab_size > 0 && bernoulli(rng, spec.domain_distractor_rate)) {
        return "d" + std::to_string(di) + "w" +
               std::to_string(uniform_index(rng, spec.domain_distractor_vocab_size));
      }
      return "w" + std::to_string(uniform_index(rng, spec.shared_distractor_vocab_size));
    };

    for (std::size_t doc_i = 0; doc_i < domain.num_docs; ++doc_i) {
      Document doc;
      doc.id = domain.name + "-" + std::to_string(doc_i);
      doc.domain = domain.name;
      const std::size_t n_sent =
          sample_range(rng, spec.min_sentences_per_doc, spec.max_sentences_per_doc);
      for (std::size_t si = 0; si < n_sent; ++si) {
        std::size_t n_events = 0;
        if (bernoulli(rng, domain.event_sentence_rate)) {
          n_events = bernoulli(rng, spec.multi_event_proportion)
                         ? sample_range(rng, 2, spec.max_events_per_sentence)
                         : 1;
        }
        std::vector<std::pair<std::size_t, std::size_t>> picks;  // (type, lexeme)
        std::size_t trigger_tokens = 0;
        for (std::size_t e = 0; e < n_events; ++e) {
          const std::size_t type = sample_categorical(rng, domain.type_frequencies);
          const std::size_t lex = uniform_index(rng, spec.lexemes_per_type);
          picks.emplace_back(type, lex);
          trigger_tokens += lexicon[type][lex].size();
        }
        // Triggers are separated by at least one distractor.
        const std::size_t min_len = trigger_tokens + (n_events > 0 ? n_events - 1 : 0);
        const std::size_t length =
            std::max(min_len, sample_range(rng, spec.min_sentence_length, spec.max_sentence_length));
        const std::size_t free_slots = length - min_len;
        // Distribute the free distractors over n_events + 1 gaps.
        std::vector<std::size_t> gaps(n_events + 1, 0);
        for (std::size_t f = 0; f < free_slots; ++f) ++gaps[uniform_index(rng, gaps.size())];

        Sentence s;
        for (std::size_t e = 0; e <= n_events; ++e) {
          const std::size_t pad = gaps[e] + (e > 0 && e < n_events ? 1 : 0);
          for (std::size_t k = 0; k < pad; ++k) s.tokens.push_back(distractor());
          if (e == n_events) break;
          const auto& lexeme = lexicon[picks[e].first][picks[e].second];
          const std::size_t start = s.tokens.size();
          s.tokens.insert(s.tokens.end(), lexeme.begin(), lexeme.end());
          s.mentions.push_back(
              Mention{start, s.tokens.size(), schema.types()[picks[e].first]});
        }
        doc.sentences.push_back(std::move(s));
      }
      out.corpus.documents.push_back(std::move(doc));
    }
  }
  validate(out.corpus, schema);
  return out;
}

}  // namespace evtrace
