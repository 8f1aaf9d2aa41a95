#include "evtrace/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "evtrace/random.hpp"

namespace evtrace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

EventSchema::EventSchema(std::vector<std::string> types) : types_(std::move(types)) {
  std::set<std::string, std::less<>> seen;
  for (const auto& t : types_) {
    if (t.empty()) throw CorpusError("schema: empty type name");
    if (is_reserved(t)) throw CorpusError("schema: type '" + t + "' collides with a reserved label");
    if (!seen.insert(t).second) throw CorpusError("schema: duplicate type '" + t + "'");
  }
}

EventSchema EventSchema::food_safety() {
  return EventSchema({"Additives", "Contraband", "Harmful-residues", "Poor-environment",
                      "Recycled-material", "Inconsistent-product", "Fake", "Low-quality",
                      "Non-compliant", "Poor-packaging", "Unreliable-product", "Damaged",
                      "Steal", "Spoiled", "Undercooked", "Cold", "Expired", "Thaw",
                      "Impurities", "Uncomfortable", "Abnormalities"});
}

bool EventSchema::is_reserved(std::string_view name) {
  return name == kNone || name == kEos || name == kBos;
}

std::optional<LabelId> EventSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < types_.size(); ++i) {
    if (types_[i] == name) return i;
  }
  if (name == kNone) return none_id();
  if (name == kEos) return eos_id();
  if (name == kBos) return bos_id();
  return std::nullopt;
}

LabelId EventSchema::label(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw CorpusError("unknown event type '" + std::string(name) + "'");
}

std::string_view EventSchema::name(LabelId id) const {
  if (id < types_.size()) return types_[id];
  if (id == none_id()) return kNone;
  if (id == eos_id()) return kEos;
  if (id == bos_id()) return kBos;
  throw CorpusError("label id " + std::to_string(id) + " out of range");
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

std::size_t Corpus::mention_count() const {
  std::size_t n = 0;
  for (const auto& d : documents)
    for (const auto& s : d.sentences) n += s.mentions.size();
  return n;
}

std::vector<std::string> Corpus::domains() const {
  std::vector<std::string> out;
  for (const auto& d : documents) {
    if (std::find(out.begin(), out.end(), d.domain) == out.end()) out.push_back(d.domain);
  }
  return out;
}

const Document* Corpus::find(std::string_view id) const {
  for (const auto& d : documents) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

std::string sentence_id(std::string_view doc_id, std::size_t index) {
  return std::string(doc_id) + "#" + std::to_string(index);
}

void validate(const Corpus& corpus, const EventSchema& schema) {
  std::unordered_set<std::string> ids;
  for (const auto& doc : corpus.documents) {
    if (doc.id.empty()) throw CorpusError("document with empty id");
    if (!ids.insert(doc.id).second) throw CorpusError("duplicate document id '" + doc.id + "'");
    if (doc.domain.empty()) throw CorpusError("document '" + doc.id + "': empty domain");
    for (std::size_t si = 0; si < doc.sentences.size(); ++si) {
      const Sentence& s = doc.sentences[si];
      if (s.tokens.empty()) {
        throw CorpusError("document '" + doc.id + "' sentence " + std::to_string(si) + ": no tokens");
      }
      std::set<Mention> seen;
      for (const auto& m : s.mentions) {
        if (m.start >= m.end || m.end > s.tokens.size()) {
          throw CorpusError("document '" + doc.id + "' sentence " + std::to_string(si) +
                            ": mention span [" + std::to_string(m.start) + ", " +
                            std::to_string(m.end) + ") outside sentence of length " +
                            std::to_string(s.tokens.size()));
        }
        if (EventSchema::is_reserved(m.type)) {
          throw CorpusError("document '" + doc.id + "': mention uses reserved label '" + m.type + "'");
        }
        auto id = schema.find(m.type);
        if (!id || !schema.is_event(*id)) {
          throw CorpusError("document '" + doc.id + "': unknown event type '" + m.type + "'");
        }
        if (!seen.insert(m).second) {
          throw CorpusError("document '" + doc.id + "': duplicate mention (" +
                            std::to_string(m.start) + ", " + std::to_string(m.end) + ", " +
                            m.type + ")");
        }
      }
    }
  }
}

namespace {

Document document_from_json(const json& j) {
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.domain = j.at("domain").get<std::string>();
  if (j.contains("labeled")) doc.labeled = j.at("labeled").get<bool>();
  for (const auto& js : j.at("sentences")) {
    Sentence s;
    s.tokens = js.at("tokens").get<std::vector<std::string>>();
    if (js.contains("mentions")) {
      for (const auto& jm : js.at("mentions")) {
        const auto start = jm.at("start").get<long long>();
        const auto end = jm.at("end").get<long long>();
        if (start < 0 || end < 0) {
          throw CorpusError("document '" + doc.id + "': negative mention offset");
        }
        s.mentions.push_back(Mention{static_cast<std::size_t>(start),
                                     static_cast<std::size_t>(end),
                                     jm.at("type").get<std::string>()});
      }
    }
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

}  // namespace

std::string document_to_json(const Document& doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["domain"] = doc.domain;
  if (!doc.labeled) j["labeled"] = false;
  j["sentences"] = ordered_json::array();
  for (const auto& s : doc.sentences) {
    ordered_json js;
    js["tokens"] = s.tokens;
    js["mentions"] = ordered_json::array();
    for (const auto& m : s.mentions) {
      ordered_json jm;
      jm["start"] = m.start;
      jm["end"] = m.end;
      jm["type"] = m.type;
      js["mentions"].push_back(std::move(jm));
    }
    j["sentences"].push_back(std::move(js));
  }
  return j.dump();
}

Corpus parse_corpus(std::istream& in, const EventSchema& schema) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.documents.push_back(document_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const CorpusError& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(corpus, schema);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const EventSchema& schema) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  return parse_corpus(in, schema);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents) out << document_to_json(doc) << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
}

SplitManifest split_corpus(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.documents.size();
  if (n < 10) {
    throw CorpusError("split: need at least 10 documents, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_substream(seed, "split");
  // Fisher-Yates with the portable index sampler.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_dev = n / 10;
  SplitManifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = corpus.documents[order[i]].id;
    if (i < n_train) m.train.push_back(id);
    else if (i < n_train + n_dev) m.dev.push_back(id);
    else m.test.push_back(id);
  }
  return m;
}

CorpusSplits apply_split(const Corpus& corpus, const SplitManifest& manifest) {
  CorpusSplits out;
  auto fill = [&](const std::vector<std::string>& ids, Corpus& dst) {
    for (const auto& id : ids) {
      const Document* doc = corpus.find(id);
      if (doc == nullptr) throw CorpusError("split manifest references unknown document '" + id + "'");
      dst.documents.push_back(*doc);
    }
  };
  fill(manifest.train, out.train);
  fill(manifest.dev, out.dev);
  fill(manifest.test, out.test);
  return out;
}

void save_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  ordered_json j;
  j["train"] = manifest.train;
  j["dev"] = manifest.dev;
  j["test"] = manifest.test;
  j["seed"] = manifest.seed;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write split manifest " + path.string());
  out << j.dump() << '\n';
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open split manifest " + path.string());
  try {
    const json j = json::parse(in);
    SplitManifest m;
    m.train = j.at("train").get<std::vector<std::string>>();
    m.dev = j.at("dev").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const json::exception& e) {
    throw CorpusError("malformed split manifest " + path.string() + ": " + e.what());
  }
}

std::vector<LabelId> DecodingTarget::labels() const {
  std::vector<LabelId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.label);
  return out;
}

std::vector<Mention> ordered_mentions(const Sentence& sentence) {
  std::vector<Mention> ms = sentence.mentions;
  std::sort(ms.begin(), ms.end());  // (start, end, type) lexicographic
  return ms;
}

DecodingTarget build_decoding_target(const Sentence& sentence, const EventSchema& schema) {
  DecodingTarget target;
  const std::size_t tail = sentence.tokens.size() + 1;
  for (const auto& m : ordered_mentions(sentence)) {
    TargetStep step;
    step.label = schema.label(m.type);
    step.gold_index = m.start + 1;
    for (std::size_t i = m.start; i < m.end; ++i) step.gold_positions.push_back(i + 1);
    step.trigger = m;
    target.steps.push_back(std::move(step));
  }
  if (target.steps.empty()) {
    target.steps.push_back(TargetStep{schema.none_id(), tail, {tail}, std::nullopt});
  }
  target.steps.push_back(TargetStep{schema.eos_id(), tail, {tail}, std::nullopt});
  return target;
}

Sentence augment_concat(const Sentence& first, const Sentence& second, std::size_t max_length) {
  const std::size_t len = first.tokens.size() + second.tokens.size();
  if (len > max_length) {
    throw CorpusError("augment_concat: combined length " + std::to_string(len) +
                      " exceeds maximum " + std::to_string(max_length));
  }
  Sentence out = first;
  out.tokens.insert(out.tokens.end(), second.tokens.begin(), second.tokens.end());
  const std::size_t shift = first.tokens.size();
  for (const auto& m : second.mentions) {
    out.mentions.push_back(Mention{m.start + shift, m.end + shift, m.type});
  }
  return out;
}

}  // namespace evtrace
