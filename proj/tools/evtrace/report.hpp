#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "evtrace/metrics.hpp"

namespace evtrace::cli {

/// Sectioned key = value text. Sections appear in insertion order.
class Report {
 public:
  explicit Report(std::string title) : title_(std::move(title)) {}

  void section(std::string name);
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, std::size_t value);
  void add_prf(const std::string& prefix, const PRF& prf);
  void add_scores(const TaskScores& scores);
  /// Resolved configuration text (already in key = value form).
  void add_config(const std::string& resolved);

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string title_;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

std::string format_double(double v);

}  // namespace evtrace::cli
