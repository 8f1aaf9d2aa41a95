#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "evtrace/tensor.hpp"

namespace evtrace {

using Rng = std::mt19937_64;

/// Deterministic generator for a named substream of a top-level seed, so
/// that e.g. the split and the initialization never share draws.
Rng make_substream(std::uint64_t seed, std::string_view name);

double uniform(Rng& rng, double lo, double hi);
bool bernoulli(Rng& rng, double p);
/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Xavier-uniform matrix: U(-a, a) with a = sqrt(6 / (rows + cols)).
Tensor xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace evtrace
