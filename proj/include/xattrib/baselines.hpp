#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xattrib/model.hpp"
#include "xattrib/search.hpp"

namespace xattrib {

// Per-position attribution scores plus the accounting needed when the
// vector is converted to an AttributionResult.
struct TokenScoreVector {
  std::vector<double> scores;
  std::string method;
  std::uint64_t forward_calls = 0;
  std::uint64_t gradient_calls = 0;
};

// The k highest-scoring positions (ties toward the lower index), returned
// ascending by position.
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores,
                                       std::size_t k);

// Uniform k-subset without replacement; no model calls at all.
AttributionResult random_k(const TokenSequence& prompt, std::size_t k,
                           std::uint64_t rng_seed);

// scores[i] = log p(y|x) - log p(y|x with token i masked). Exactly
// prompt-length + 1 forward calls.
TokenScoreVector leave_one_out(const ScoredGenerator& model,
                               const TokenSequence& prompt,
                               const TokenSequence& target);

inline constexpr int kDefaultIgSteps = 32;

// |mean gradient along the straight path from the all-zero to the all-ones
// mask|, right Riemann sum with `steps` points; exactly `steps` gradient
// calls.
TokenScoreVector integrated_gradients(const ScoredGenerator& model,
                                      const TokenSequence& prompt,
                                      const TokenSequence& target,
                                      int steps = kDefaultIgSteps);

// Top-k of the scores as an AttributionResult with an empty trace.
AttributionResult to_attribution(const TokenScoreVector& scores,
                                 std::size_t k, std::uint64_t seed);

}  // namespace xattrib
