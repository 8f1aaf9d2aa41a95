#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evtrace {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using LabelId = std::size_t;

/// Ordered event types followed by the reserved labels None, EOS and BOS.
class EventSchema {
 public:
  static constexpr std::string_view kNone = "None";
  static constexpr std::string_view kEos = "EOS";
  static constexpr std::string_view kBos = "BOS";

  EventSchema() = default;
  explicit EventSchema(std::vector<std::string> types);
  /// The 21 food-safety event types used by the multi-source benchmark.
  static EventSchema food_safety();

  std::size_t type_count() const { return types_.size(); }
  std::size_t label_count() const { return types_.size() + 3; }
  const std::vector<std::string>& types() const { return types_; }

  LabelId none_id() const { return types_.size(); }
  LabelId eos_id() const { return types_.size() + 1; }
  LabelId bos_id() const { return types_.size() + 2; }
  bool is_event(LabelId id) const { return id < types_.size(); }

  /// Label id for a type or reserved name; nullopt when unknown.
  std::optional<LabelId> find(std::string_view name) const;
  LabelId label(std::string_view name) const;
  std::string_view name(LabelId id) const;
  static bool is_reserved(std::string_view name);

  friend bool operator==(const EventSchema&, const EventSchema&) = default;

 private:
  std::vector<std::string> types_;
};

struct Mention {
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive token index
  std::string type;

  std::size_t length() const { return end - start; }
  friend auto operator<=>(const Mention&, const Mention&) = default;
};

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Document {
  std::string id;
  std::string domain;
  std::vector<Sentence> sentences;
  /// False for documents whose labels were stripped (unlabeled target data).
  bool labeled = true;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t sentence_count() const;
  std::size_t mention_count() const;
  std::vector<std::string> domains() const;  // first-appearance order
  const Document* find(std::string_view id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Stable identifier of sentence `index` in document `doc_id`.
std::string sentence_id(std::string_view doc_id, std::size_t index);

/// Checks every invariant; throws CorpusError naming the document.
void validate(const Corpus& corpus, const EventSchema& schema);

Corpus parse_corpus(std::istream& in, const EventSchema& schema);
Corpus load_corpus(const std::filesystem::path& path, const EventSchema& schema);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
std::string document_to_json(const Document& doc);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct CorpusSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
};

/// Document-level 8:1:1 partition: floor(0.8n) / floor(0.1n) / remainder.
SplitManifest split_corpus(const Corpus& corpus, std::uint64_t seed);
CorpusSplits apply_split(const Corpus& corpus, const SplitManifest& manifest);
void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest load_manifest(const std::filesystem::path& path);

/// Supervision for one decoding step.
struct TargetStep {
  LabelId label = 0;
  /// Position in the sentinel-padded encoder rows (token i sits at i + 1)
  /// used by the teacher-forcing mask.
  std::size_t gold_index = 0;
  /// Positions sharing the gold attention mass uniformly.
  std::vector<std::size_t> gold_positions;
  std::optional<Mention> trigger;
};

struct DecodingTarget {
  std::vector<TargetStep> steps;

  std::vector<LabelId> labels() const;
};

/// Left-to-right label sequence ending in EOS ([None, EOS] when event-less).
/// Multi-token triggers spread gold attention uniformly over their tokens and
/// teacher-force the leftmost token. None and EOS attend the tail sentinel.
DecodingTarget build_decoding_target(const Sentence& sentence, const EventSchema& schema);

/// Mentions sorted by (start, end, type).
std::vector<Mention> ordered_mentions(const Sentence& sentence);

/// Concatenation augmentation: tokens joined, second sentence's mentions
/// shifted by the first sentence's length.
Sentence augment_concat(const Sentence& first, const Sentence& second,
                        std::size_t max_length);

}  // namespace evtrace
