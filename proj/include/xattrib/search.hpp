#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xattrib/mask.hpp"
#include "xattrib/model.hpp"
#include "xattrib/rng.hpp"

namespace xattrib {

// Nonnegative gradient magnitudes steering both the initial mask and the
// swap proposals. Callers take the absolute value; temperature divides the
// magnitudes before the softmax.
struct GradientGuide {
  std::vector<double> magnitudes;
  double temperature = 1.0;
};

// Ablation switches: no_gradient_init replaces the top-k start with a
// uniformly random k-subset, no_probability replaces the softmax proposal
// with uniform sampling. Both keep the accept rule.
enum class SearchVariant { full, no_gradient_init, no_probability };

struct SearchConfig {
  int iterations = 50;
  std::uint64_t rng_seed = 0;
  double temperature = 1.0;
  bool strict_improvement = true;
  SearchVariant variant = SearchVariant::full;
};

struct AttributionResult {
  std::string method;
  std::vector<std::size_t> explanatory_indices;  // ascending, the mask zeros
  MaskState final_mask;
  // Accepted-state masked log-likelihood, one entry per iteration plus the
  // initial state; nonincreasing. Empty for non-iterative methods.
  std::vector<double> loglik_trace;
  std::uint64_t gradient_calls = 0;
  std::uint64_t forward_calls = 0;
  std::uint64_t seed = 0;
};

// {id, method, k, indices, trace, gradient_calls, forward_calls, seed},
// keys in that order.
nlohmann::ordered_json attribution_to_json(const AttributionResult& result,
                                           const std::string& id);

// log p(y|x) - log p(y|m*x); positive when masking hurts the target.
// Exactly 0 for the all-ones mask.
double objective(const ScoredGenerator& model, const TokenSequence& prompt,
                 const TokenSequence& target, const MaskState& mask);

// Mask with zeros at the k largest magnitudes; ties and the all-zero guide
// resolve toward lower indices. k = 0 yields the identity mask.
MaskState init_mask(const GradientGuide& guide, std::size_t k);

// Proposal (l, v): l sampled over unmasked positions, v over masked ones,
// each by softmax of the guide restricted to that support. A flat guide
// reduces to uniform sampling.
std::pair<std::size_t, std::size_t> sample_swap(const MaskState& mask,
                                                const GradientGuide& guide,
                                                Rng& rng);

// One gradient call at the all-ones mask, top-k initialization, then
// `iterations` proposed swaps accepted only when the masked
// log-likelihood strictly decreases.
AttributionResult xprompt_search(const ScoredGenerator& model,
                                 const TokenSequence& prompt,
                                 const TokenSequence& target, std::size_t k,
                                 const SearchConfig& config);

struct OracleResult {
  MaskState best_mask;
  double best_objective;
  std::uint64_t evaluations;  // C(T, k)
};

inline constexpr std::uint64_t kDefaultOracleBudget = 100000;

// Exhaustive maximum of the objective over every k-subset, lexicographic
// order, first maximum kept. Refuses instances where C(T, k) exceeds the
// budget before evaluating anything.
OracleResult brute_force_oracle(const ScoredGenerator& model,
                                const TokenSequence& prompt,
                                const TokenSequence& target, std::size_t k,
                                std::uint64_t budget = kDefaultOracleBudget);

// C(n, k) capped at 2^63-1 to avoid overflow during budget checks.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k);

}  // namespace xattrib
