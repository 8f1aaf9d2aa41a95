#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evtrace::cli {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void Report::section(std::string name) { sections_.push_back({std::move(name), {}}); }

void Report::add(const std::string& key, const std::string& value) {
  if (sections_.empty()) section("summary");
  sections_.back().second.emplace_back(key, value);
}

void Report::add(const std::string& key, double value) { add(key, format_double(value)); }
void Report::add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }

void Report::add_prf(const std::string& prefix, const PRF& prf) {
  add(prefix + ".precision", prf.precision);
  add(prefix + ".recall", prf.recall);
  add(prefix + ".f1", prf.f1);
  add(prefix + ".true_positives", prf.true_positives);
  add(prefix + ".predicted", prf.predicted);
  add(prefix + ".gold", prf.gold);
}

void Report::add_scores(const TaskScores& scores) {
  add_prf("identification", scores.identification);
  add_prf("classification", scores.classification);
}

void Report::add_config(const std::string& resolved) {
  section("config");
  std::istringstream in(resolved);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '[' || line[0] == '#' || eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    add(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string Report::str() const {
  std::ostringstream out;
  out << "# " << title_ << "\n";
  for (const auto& [name, entries] : sections_) {
    out << "\n[" << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

void Report::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << str();
}

}  // namespace evtrace::cli
