#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace evtrace {

struct PredictedEvent {
  std::string type;
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive

  friend auto operator<=>(const PredictedEvent&, const PredictedEvent&) = default;
};

struct Prediction {
  std::string sentence_id;
  std::vector<PredictedEvent> events;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Keyed by sentence id ("<doc id>#<sentence index>").
using PredictionSet = std::map<std::string, std::vector<PredictedEvent>>;

/// One JSON object per line: {"id": str, "events": [{"type", "start", "end"}]}.
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
PredictionSet to_prediction_set(const std::vector<Prediction>& predictions);

}  // namespace evtrace
