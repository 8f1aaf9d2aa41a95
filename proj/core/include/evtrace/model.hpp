#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evtrace/autodiff.hpp"
#include "evtrace/corpus.hpp"

namespace evtrace {

/// Token vocabulary; ids 0..2 are reserved for UNK, BOS (head sentinel) and
/// SEP (tail sentinel).
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kSep = 2;

  Vocabulary();
  /// Every token appearing in `corpus`, in first-appearance order.
  static Vocabulary from_corpus(const Corpus& corpus);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t add(const std::string& token);
  std::size_t id(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// How the one-hot trace mask turns into applied attention weights.
enum class MaskMode {
  kSelect,          // alpha_t = I_t: the selected position gets weight exactly 1
  kScaleByWeight,   // alpha_t = I_t * preliminary weights
};

/// Feature transform between encoder and decoder.
enum class FeatureMode {
  kIdentity,
  kSharedPrivateConcat,
  kSharedPrivateSum,
};

struct ModelConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 32;  // per LSTM direction
  std::size_t decoder_dim = 32;
  std::size_t label_embedding_dim = 16;
  MaskMode mask_mode = MaskMode::kSelect;
  FeatureMode feature_mode = FeatureMode::kIdentity;
  std::size_t shared_dim = 16;
  std::size_t private_dim = 16;
  /// Domains with private transforms / classifier outputs, in index order.
  std::vector<std::string> domains;
  bool domain_classifier = false;

  std::size_t encoder_width() const { return 2 * hidden_dim; }
  /// Row width of the features the decoder attends over.
  std::size_t feature_dim() const;
};

struct LstmCell {
  Parameter* weight = nullptr;  // 4h x (input + h), gate order i, f, g, o
  Parameter* bias = nullptr;    // 4h
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
};

struct EncoderParams {
  Parameter* embedding = nullptr;  // vocab x d_emb
  LstmCell forward;
  LstmCell backward;
};

struct DecoderParams {
  Parameter* attention = nullptr;        // W_a: feature x decoder
  LstmCell cell;                         // input: label embedding + feature
  Parameter* output = nullptr;           // W_d: (decoder + feature) x labels
  Parameter* label_embedding = nullptr;  // labels x d_lab
};

struct DomainHeads {
  Parameter* shared_weight = nullptr;  // encoder_width x shared
  Parameter* shared_bias = nullptr;
  std::vector<Parameter*> private_weight;  // one per domain
  std::vector<Parameter*> private_bias;
  Parameter* classifier_weight = nullptr;  // encoder_width x domains
  Parameter* classifier_bias = nullptr;
};

/// Encoder, tracing decoder and optional domain heads with their parameters.
/// Move-only: the parameter handles point into the owned store.
class TracingModel {
 public:
  TracingModel(ModelConfig config, EventSchema schema, Vocabulary vocab, std::uint64_t seed);
  TracingModel(TracingModel&&) noexcept = default;
  TracingModel& operator=(TracingModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const EventSchema& schema() const { return schema_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  const EncoderParams& encoder() const { return encoder_; }
  const DecoderParams& decoder() const { return decoder_; }
  const std::optional<DomainHeads>& heads() const { return heads_; }

  /// Index of `domain` in config().domains; throws for unknown tags.
  std::size_t domain_index(std::string_view domain) const;

 private:
  ModelConfig config_;
  EventSchema schema_;
  Vocabulary vocab_;
  ParameterStore params_;
  EncoderParams encoder_;
  DecoderParams decoder_;
  std::optional<DomainHeads> heads_;
};

/// Free-form settings echoed into a checkpoint next to the tensors.
using ConfigEcho = std::map<std::string, std::string>;

/// Text checkpoint: config echo, schema, vocabulary and every tensor in
/// hexadecimal floating point, so save/load round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const TracingModel& model,
                     const ConfigEcho& echo);
struct LoadedCheckpoint {
  TracingModel model;
  ConfigEcho echo;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string_view to_string(MaskMode mode);
std::string_view to_string(FeatureMode mode);
MaskMode parse_mask_mode(std::string_view text);
FeatureMode parse_feature_mode(std::string_view text);

}  // namespace evtrace
