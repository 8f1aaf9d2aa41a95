#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evtrace::cli {

/// Failure reported to the user as one JSON line on stderr.
class CliError : public std::runtime_error {
 public:
  CliError(std::string kind, const std::string& message, std::vector<std::string> keys = {})
      : std::runtime_error(message), kind_(std::move(kind)), keys_(std::move(keys)) {}

  const std::string& kind() const { return kind_; }
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::string kind_;
  std::vector<std::string> keys_;
};

}  // namespace evtrace::cli
