#include "evtrace/analysis.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace evtrace {

std::vector<double> type_distribution(const Corpus& corpus, std::string_view domain,
                                      const EventSchema& schema) {
  std::vector<double> counts(schema.type_count(), 0.0);
  double total = 0.0;
  for (const auto& d : corpus.documents) {
    if (d.domain != domain) continue;
    for (const auto& s : d.sentences) {
      for (const auto& m : s.mentions) {
        const LabelId id = schema.label(m.type);
        if (!schema.is_event(id)) throw CorpusError("type_distribution: reserved label in mention");
        counts[id] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) throw CorpusError("type_distribution: domain '" + std::string(domain) + "' has no mentions");
  for (double& c : counts) c /= total;
  return counts;
}

double wasserstein_1d(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("wasserstein_1d: length mismatch");
  double cp = 0.0, cq = 0.0, dist = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    cp += p[k];
    cq += q[k];
    dist += std::abs(cp - cq);
  }
  return dist;
}

HeterogeneityReport heterogeneity(const Corpus& corpus, const EventSchema& schema) {
  HeterogeneityReport r;
  r.domains = corpus.domains();
  const std::size_t n = r.domains.size();
  if (n < 2) throw CorpusError("heterogeneity: need at least two domains");
  for (const auto& d : r.domains) r.distributions.push_back(type_distribution(corpus, d, schema));
  r.pairwise.assign(n, std::vector<double>(n, 0.0));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      r.pairwise[i][j] = r.pairwise[j][i] = wasserstein_1d(r.distributions[i], r.distributions[j]);
      sum += r.pairwise[i][j];
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  r.average_wasserstein = sum / pairs / static_cast<double>(schema.type_count());

  const CorpusStats stats = corpus_stats(corpus);
  for (const auto& d : r.domains) r.event_density.push_back(stats.event_density.at(d));
  r.event_density_std = population_std(r.event_density);
  return r;
}

double average_wasserstein(const Corpus& corpus, const EventSchema& schema) {
  return heterogeneity(corpus, schema).average_wasserstein;
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cohen_kappa: sequences differ in length (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw std::invalid_argument("cohen_kappa: empty sequences");
  std::map<std::string, double> ma, mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, count] : ma) {
    if (auto it = mb.find(label); it != mb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0) throw std::domain_error("cohen_kappa: chance agreement is 1, kappa undefined");
  return (po - pe) / (1.0 - pe);
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  std::map<std::string, std::pair<double, double>> density;  // mentions, sentences
  std::map<std::string, std::pair<double, double>> lengths;  // tokens, sentences
  for (const auto& d : corpus.documents) {
    for (const auto& s : d.sentences) {
      ++st.sentences;
      if (!s.mentions.empty()) ++st.evented_sentences;
      if (s.mentions.size() >= 2) ++st.multi_event_sentences;
      for (const auto& m : s.mentions) {
        const std::size_t len = m.length();
        ++st.trigger_length_histogram[len <= 2 ? 0 : (len <= 4 ? 1 : 2)];
      }
      density[d.domain].first += static_cast<double>(s.mentions.size());
      density[d.domain].second += 1.0;
      lengths[d.domain].first += static_cast<double>(s.tokens.size());
      lengths[d.domain].second += 1.0;
    }
  }
  if (st.evented_sentences) {
    st.multi_event_proportion =
        static_cast<double>(st.multi_event_sentences) / static_cast<double>(st.evented_sentences);
  }
  if (st.sentences) {
    st.multi_event_proportion_all =
        static_cast<double>(st.multi_event_sentences) / static_cast<double>(st.sentences);
  }
  std::vector<double> dens, lens;
  for (const auto& [dom, v] : density) {
    st.event_density[dom] = v.first / v.second;
    dens.push_back(st.event_density[dom]);
  }
  for (const auto& [dom, v] : lengths) {
    st.mean_sentence_length[dom] = v.first / v.second;
    lens.push_back(st.mean_sentence_length[dom]);
  }
  st.event_density_std = population_std(dens);
  st.sentence_length_std = population_std(lens);
  return st;
}

std::vector<std::string> split_segmentation_line(std::string_view line) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('/', start);
    words.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return words;
}

std::vector<std::vector<std::string>> load_segmentation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open segmentation file " + path.string());
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(split_segmentation_line(line));
  }
  return out;
}

std::vector<std::size_t> word_boundaries(const Sentence& sentence, std::span<const std::string> words) {
  // Character offsets where each token ends.
  std::vector<std::size_t> token_end;
  std::size_t pos = 0;
  for (const auto& t : sentence.tokens) {
    pos += t.size();
    token_end.push_back(pos);
  }
  std::string joined_words;
  std::vector<std::size_t> boundaries{0};
  std::size_t tok = 0;
  for (const auto& w : words) {
    if (w.empty()) throw CorpusError("segmentation: empty word");
    joined_words += w;
    while (tok < token_end.size() && token_end[tok] < joined_words.size()) ++tok;
    if (tok >= token_end.size() || token_end[tok] != joined_words.size()) {
      throw CorpusError("segmentation: word boundary after '" + w + "' falls inside a token");
    }
    boundaries.push_back(++tok);
  }
  std::string joined_tokens;
  for (const auto& t : sentence.tokens) joined_tokens += t;
  if (joined_words != joined_tokens) {
    throw CorpusError("segmentation does not cover the sentence '" + joined_tokens + "'");
  }
  return boundaries;
}

TriggerWordFit classify_trigger(const Mention& mention, std::span<const std::size_t> boundaries) {
  // Word w spans [boundaries[w], boundaries[w + 1]).
  std::size_t first = 0, last = 0;
  for (std::size_t w = 0; w + 1 < boundaries.size(); ++w) {
    if (boundaries[w] <= mention.start && mention.start < boundaries[w + 1]) first = w;
    if (boundaries[w] < mention.end && mention.end <= boundaries[w + 1]) last = w;
  }
  if (first != last) return TriggerWordFit::kCrossWord;
  if (boundaries[first] == mention.start && boundaries[first + 1] == mention.end) {
    return TriggerWordFit::kRegular;
  }
  return TriggerWordFit::kInsideWord;
}

MismatchStats word_trigger_mismatch(const Corpus& corpus,
                                    const std::vector<std::vector<std::string>>& segmentation) {
  MismatchStats st;
  std::size_t line = 0;
  for (const auto& d : corpus.documents) {
    for (const auto& s : d.sentences) {
      if (line >= segmentation.size()) {
        throw CorpusError("segmentation has " + std::to_string(segmentation.size()) +
                          " lines but the corpus has more sentences");
      }
      const auto bounds = word_boundaries(s, segmentation[line++]);
      for (const auto& m : s.mentions) {
        switch (classify_trigger(m, bounds)) {
          case TriggerWordFit::kRegular: ++st.regular; break;
          case TriggerWordFit::kCrossWord: ++st.cross_word; break;
          case TriggerWordFit::kInsideWord: ++st.inside_word; break;
        }
      }
    }
  }
  if (line != segmentation.size()) {
    throw CorpusError("segmentation has " + std::to_string(segmentation.size()) + " lines for " +
                      std::to_string(line) + " sentences");
  }
  const double total = static_cast<double>(st.regular + st.cross_word + st.inside_word);
  if (total > 0.0) {
    st.regular_pct = 100.0 * static_cast<double>(st.regular) / total;
    st.cross_word_pct = 100.0 * static_cast<double>(st.cross_word) / total;
    st.inside_word_pct = 100.0 * static_cast<double>(st.inside_word) / total;
  }
  return st;
}

std::pair<std::vector<std::string>, std::vector<std::string>> load_paired_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotation file " + path.string());
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected two tab-separated labels");
    }
    out.first.push_back(line.substr(0, tab));
    out.second.push_back(line.substr(tab + 1));
  }
  return out;
}

}  // namespace evtrace
