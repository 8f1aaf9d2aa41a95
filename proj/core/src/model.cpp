#include "evtrace/model.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "evtrace/random.hpp"

namespace evtrace {

using ordered_json = nlohmann::ordered_json;

Vocabulary::Vocabulary() {
  add("<unk>");
  add("<bos>");
  add("<sep>");
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  tokens_.push_back(token);
  index_.emplace(token, tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Vocabulary Vocabulary::from_corpus(const Corpus& corpus) {
  Vocabulary v;
  for (const auto& d : corpus.documents)
    for (const auto& s : d.sentences)
      for (const auto& t : s.tokens) v.add(t);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  Vocabulary v;
  if (lines.size() < 3) throw std::runtime_error("vocabulary " + path.string() + " lacks reserved ids");
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (v.add(lines[i]) != i) {
      throw std::runtime_error("vocabulary " + path.string() + ": duplicate token on line " +
                               std::to_string(i + 1));
    }
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::size_t ModelConfig::feature_dim() const {
  switch (feature_mode) {
    case FeatureMode::kIdentity: return encoder_width();
    case FeatureMode::kSharedPrivateConcat: return shared_dim + private_dim;
    case FeatureMode::kSharedPrivateSum: return shared_dim;
  }
  return encoder_width();
}

namespace {

LstmCell make_cell(ParameterStore& store, Rng& rng, const std::string& prefix,
                   std::size_t input_dim, std::size_t hidden_dim) {
  LstmCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.weight = &store.add(prefix + ".weight",
                           xavier_uniform(rng, 4 * hidden_dim, input_dim + hidden_dim));
  cell.bias = &store.add(prefix + ".bias", Tensor({4 * hidden_dim}));
  return cell;
}

}  // namespace

TracingModel::TracingModel(ModelConfig config, EventSchema schema, Vocabulary vocab,
                           std::uint64_t seed)
    : config_(std::move(config)), schema_(std::move(schema)), vocab_(std::move(vocab)) {
  if (config_.embedding_dim == 0 || config_.hidden_dim == 0 || config_.decoder_dim == 0 ||
      config_.label_embedding_dim == 0) {
    throw std::invalid_argument("model: dimensions must be positive");
  }
  const bool shared_private = config_.feature_mode != FeatureMode::kIdentity;
  if (shared_private) {
    if (config_.domains.empty()) throw std::invalid_argument("model: shared-private features need domains");
    if (config_.feature_mode == FeatureMode::kSharedPrivateSum &&
        config_.shared_dim != config_.private_dim) {
      throw std::invalid_argument("model: summed shared/private features need equal widths");
    }
  }
  if (config_.domain_classifier && config_.domains.size() < 2) {
    throw std::invalid_argument("model: a domain classifier needs at least two domains");
  }

  Rng rng = make_substream(seed, "init");
  const std::size_t labels = schema_.label_count();
  const std::size_t feat = config_.feature_dim();
  const std::size_t enc = config_.encoder_width();

  encoder_.embedding =
      &params_.add("encoder.embedding", xavier_uniform(rng, vocab_.size(), config_.embedding_dim));
  encoder_.forward = make_cell(params_, rng, "encoder.forward", config_.embedding_dim, config_.hidden_dim);
  encoder_.backward = make_cell(params_, rng, "encoder.backward", config_.embedding_dim, config_.hidden_dim);

  decoder_.attention = &params_.add("decoder.attention", xavier_uniform(rng, feat, config_.decoder_dim));
  decoder_.cell = make_cell(params_, rng, "decoder.cell", config_.label_embedding_dim + feat,
                            config_.decoder_dim);
  decoder_.output = &params_.add("decoder.output", xavier_uniform(rng, config_.decoder_dim + feat, labels));
  decoder_.label_embedding =
      &params_.add("decoder.label_embedding", xavier_uniform(rng, labels, config_.label_embedding_dim));

  // Attention parameters learn only from the supervised attention loss.
  Parameter* const attention[] = {decoder_.attention};
  with_barrier(loss_names::kGeneration, attention);
  with_barrier(loss_names::kBagOfLabels, attention);

  if (shared_private || config_.domain_classifier) {
    DomainHeads heads;
    if (shared_private) {
      heads.shared_weight = &params_.add("domain.shared.weight", xavier_uniform(rng, enc, config_.shared_dim));
      heads.shared_bias = &params_.add("domain.shared.bias", Tensor({config_.shared_dim}));
      for (const auto& d : config_.domains) {
        heads.private_weight.push_back(
            &params_.add("domain.private." + d + ".weight", xavier_uniform(rng, enc, config_.private_dim)));
        heads.private_bias.push_back(
            &params_.add("domain.private." + d + ".bias", Tensor({config_.private_dim})));
      }
    }
    if (config_.domain_classifier) {
      heads.classifier_weight = &params_.add("domain.classifier.weight",
                                             xavier_uniform(rng, enc, config_.domains.size()));
      heads.classifier_bias = &params_.add("domain.classifier.bias", Tensor({config_.domains.size()}));
    }
    heads_ = std::move(heads);
  }
}

std::size_t TracingModel::domain_index(std::string_view domain) const {
  for (std::size_t i = 0; i < config_.domains.size(); ++i) {
    if (config_.domains[i] == domain) return i;
  }
  throw std::invalid_argument("unknown domain tag '" + std::string(domain) + "'");
}

std::string_view to_string(MaskMode mode) {
  return mode == MaskMode::kSelect ? "select" : "scale";
}

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kIdentity: return "identity";
    case FeatureMode::kSharedPrivateConcat: return "shared_private_concat";
    case FeatureMode::kSharedPrivateSum: return "shared_private_sum";
  }
  return "identity";
}

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "select") return MaskMode::kSelect;
  if (text == "scale") return MaskMode::kScaleByWeight;
  throw std::invalid_argument("unknown mask mode '" + std::string(text) + "'");
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "identity") return FeatureMode::kIdentity;
  if (text == "shared_private_concat") return FeatureMode::kSharedPrivateConcat;
  if (text == "shared_private_sum") return FeatureMode::kSharedPrivateSum;
  throw std::invalid_argument("unknown feature mode '" + std::string(text) + "'");
}

namespace {

constexpr int kCheckpointVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("checkpoint: bad number '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TracingModel& model,
                     const ConfigEcho& echo) {
  const ModelConfig& c = model.config();
  ordered_json j;
  j["format"] = "evtrace-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = {{"embedding_dim", c.embedding_dim},
                {"hidden_dim", c.hidden_dim},
                {"decoder_dim", c.decoder_dim},
                {"label_embedding_dim", c.label_embedding_dim},
                {"mask_mode", std::string(to_string(c.mask_mode))},
                {"feature_mode", std::string(to_string(c.feature_mode))},
                {"shared_dim", c.shared_dim},
                {"private_dim", c.private_dim},
                {"domains", c.domains},
                {"domain_classifier", c.domain_classifier}};
  j["echo"] = ordered_json(echo);
  j["schema"] = model.schema().types();
  j["vocab"] = model.vocab().tokens();
  ordered_json tensors = ordered_json::array();
  const ParameterStore& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter& p = store[i];
    ordered_json values = ordered_json::array();
    for (double v : p.value.values()) values.push_back(hex_double(v));
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"values", std::move(values)}});
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "evtrace-checkpoint") {
    throw std::runtime_error(path.string() + " is not an evtrace checkpoint");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path.string());
  }
  const auto& jm = j.at("model");
  ModelConfig c;
  c.embedding_dim = jm.at("embedding_dim");
  c.hidden_dim = jm.at("hidden_dim");
  c.decoder_dim = jm.at("decoder_dim");
  c.label_embedding_dim = jm.at("label_embedding_dim");
  c.mask_mode = parse_mask_mode(jm.at("mask_mode").get<std::string>());
  c.feature_mode = parse_feature_mode(jm.at("feature_mode").get<std::string>());
  c.shared_dim = jm.at("shared_dim");
  c.private_dim = jm.at("private_dim");
  c.domains = jm.at("domains").get<std::vector<std::string>>();
  c.domain_classifier = jm.at("domain_classifier");

  Vocabulary vocab;
  const auto tokens = j.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 3; i < tokens.size(); ++i) vocab.add(tokens[i]);

  TracingModel model(c, EventSchema(j.at("schema").get<std::vector<std::string>>()),
                     std::move(vocab), 0);
  ParameterStore& store = model.params();
  const auto& tensors = j.at("tensors");
  if (tensors.size() != store.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(store.size()) +
                             " tensors, found " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& jt = tensors[i];
    Parameter& p = store[i];
    if (jt.at("name").get<std::string>() != p.name) {
      throw std::runtime_error("checkpoint: tensor " + std::to_string(i) + " is '" +
                               jt.at("name").get<std::string>() + "', expected '" + p.name + "'");
    }
    std::vector<double> values;
    for (const auto& v : jt.at("values")) values.push_back(parse_hex_double(v.get<std::string>()));
    Tensor t(jt.at("shape").get<Shape>(), std::move(values));
    if (t.shape() != p.value.shape()) throw ShapeError("checkpoint: shape mismatch for " + p.name);
    p.value = std::move(t);
  }
  LoadedCheckpoint out{std::move(model), j.at("echo").get<ConfigEcho>()};
  return out;
}

}  // namespace evtrace
