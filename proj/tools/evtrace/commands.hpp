#pragma once

#include <string>

#include "options.hpp"

namespace evtrace::cli {

// `resolved` is the effective configuration echoed into every output.
void run_synth(const Options& opts, const std::string& resolved);
void run_split(const Options& opts, const std::string& resolved);
void run_train(const Options& opts, const std::string& resolved);
void run_tune(const Options& opts, const std::string& resolved);
void run_predict(const Options& opts, const std::string& resolved);
void run_eval(const Options& opts, const std::string& resolved);
void run_analyze(const Options& opts, const std::string& resolved);

}  // namespace evtrace::cli
