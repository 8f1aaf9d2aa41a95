#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evtrace/corpus.hpp"

namespace evtrace {

/// Relative frequency of each schema type among the triggers of `domain`.
/// Throws CorpusError when the domain has no mentions.
std::vector<double> type_distribution(const Corpus& corpus, std::string_view domain,
                                      const EventSchema& schema);

/// 1-D Wasserstein distance between distributions over type indices 0..M-1
/// with |i - j| ground cost: sum_k |F_p(k) - F_q(k)|.
double wasserstein_1d(std::span<const double> p, std::span<const double> q);

struct HeterogeneityReport {
  std::vector<std::string> domains;
  std::vector<std::vector<double>> distributions;
  /// pairwise[i][j] for i < j.
  std::vector<std::vector<double>> pairwise;
  /// (1 / M) * (1 / C(N, 2)) * sum of pairwise distances.
  double average_wasserstein = 0.0;
  std::vector<double> event_density;  // mentions per sentence, per domain
  double event_density_std = 0.0;
};

/// Needs at least two domains, each with at least one mention.
HeterogeneityReport heterogeneity(const Corpus& corpus, const EventSchema& schema);
double average_wasserstein(const Corpus& corpus, const EventSchema& schema);

/// Cohen's kappa for two equal-length label sequences. Throws
/// std::invalid_argument on length mismatch and std::domain_error when chance
/// agreement is 1.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

struct CorpusStats {
  /// Trigger lengths bucketed as [1,2], [3,4], [5, inf).
  std::array<std::size_t, 3> trigger_length_histogram{};
  std::size_t sentences = 0;
  std::size_t evented_sentences = 0;
  std::size_t multi_event_sentences = 0;
  /// Multi-event sentences over evented sentences.
  double multi_event_proportion = 0.0;
  /// Multi-event sentences over all sentences.
  double multi_event_proportion_all = 0.0;
  std::map<std::string, double> event_density;
  double event_density_std = 0.0;
  std::map<std::string, double> mean_sentence_length;
  double sentence_length_std = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

/// Population standard deviation.
double population_std(std::span<const double> values);

struct MismatchStats {
  std::size_t cross_word = 0;
  std::size_t inside_word = 0;
  std::size_t regular = 0;
  double cross_word_pct = 0.0;
  double inside_word_pct = 0.0;
  double regular_pct = 0.0;
};

enum class TriggerWordFit { kRegular, kCrossWord, kInsideWord };

/// Word boundaries as token offsets [0, b1, b2, ..., n] for a sentence whose
/// tokens concatenate to the concatenated words. Throws CorpusError if the
/// segmentation does not cover the sentence or splits inside a token.
std::vector<std::size_t> word_boundaries(const Sentence& sentence, std::span<const std::string> words);
TriggerWordFit classify_trigger(const Mention& mention, std::span<const std::size_t> boundaries);

/// One segmentation line per corpus sentence (corpus order), words separated
/// by a single '/'.
std::vector<std::vector<std::string>> load_segmentation(const std::filesystem::path& path);
std::vector<std::string> split_segmentation_line(std::string_view line);
MismatchStats word_trigger_mismatch(const Corpus& corpus,
                                    const std::vector<std::vector<std::string>>& segmentation);

/// Paired annotation file: one item per line, two labels separated by a tab.
std::pair<std::vector<std::string>, std::vector<std::string>> load_paired_annotations(
    const std::filesystem::path& path);

}  // namespace evtrace
