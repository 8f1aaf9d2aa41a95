#include "evtrace/prediction.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace evtrace {

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write predictions " + path.string());
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["id"] = p.sentence_id;
    j["events"] = nlohmann::ordered_json::array();
    for (const auto& e : p.events) {
      j["events"].push_back({{"type", e.type}, {"start", e.start}, {"end", e.end}});
    }
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.sentence_id = j.at("id").get<std::string>();
      for (const auto& e : j.at("events")) {
        p.events.push_back({e.at("type").get<std::string>(), e.at("start").get<std::size_t>(),
                            e.at("end").get<std::size_t>()});
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": malformed prediction: " + e.what());
    }
  }
  return out;
}

PredictionSet to_prediction_set(const std::vector<Prediction>& predictions) {
  PredictionSet set;
  for (const auto& p : predictions) {
    auto& events = set[p.sentence_id];
    events.insert(events.end(), p.events.begin(), p.events.end());
  }
  return set;
}

}  // namespace evtrace
