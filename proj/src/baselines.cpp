#include "xattrib/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xattrib/errors.hpp"
#include "xattrib/rng.hpp"

namespace xattrib {

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores,
                                       std::size_t k) {
  if (k > scores.size()) {
    throw invalid_cardinality("k exceeds the score vector length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

AttributionResult random_k(const TokenSequence& prompt, std::size_t k,
                           std::uint64_t rng_seed) {
  const std::size_t T = prompt.size();
  if (T < 2 || k < 1 || k > T - 1) {
    throw invalid_cardinality("random selection needs 1 <= k <= T - 1");
  }
  Rng rng(rng_seed);
  std::vector<std::size_t> pool(T);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> picked;
  picked.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    std::size_t j = rng.next_index(pool.size());
    picked.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::sort(picked.begin(), picked.end());

  AttributionResult result;
  result.method = "random";
  result.explanatory_indices = picked;
  result.final_mask = MaskState::from_zero_positions(T, picked);
  result.seed = rng_seed;
  return result;
}

TokenScoreVector leave_one_out(const ScoredGenerator& model,
                               const TokenSequence& prompt,
                               const TokenSequence& target) {
  const std::size_t T = prompt.size();
  if (T < 2) throw contract_error("leave-one-out needs at least two tokens");
  if (target.empty()) throw contract_error("target must be nonempty");

  double ll_full = model.log_likelihood(prompt, target);
  TokenScoreVector out;
  out.method = "loo";
  out.scores.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    std::vector<double> point(T, 1.0);
    point[i] = 0.0;
    out.scores[i] = ll_full - model.log_likelihood(prompt, point, target);
  }
  out.forward_calls = static_cast<std::uint64_t>(T) + 1;
  return out;
}

TokenScoreVector integrated_gradients(const ScoredGenerator& model,
                                      const TokenSequence& prompt,
                                      const TokenSequence& target, int steps) {
  if (!model.supports_gradient()) {
    throw unsupported_capability(model.name() +
                                 " does not expose a mask gradient");
  }
  if (steps < 1) throw contract_error("step count must be at least 1");
  if (prompt.empty()) throw contract_error("prompt must be nonempty");
  if (target.empty()) throw contract_error("target must be nonempty");

  const std::size_t T = prompt.size();
  std::vector<double> acc(T, 0.0);
  for (int s = 1; s <= steps; ++s) {
    double level = static_cast<double>(s) / static_cast<double>(steps);
    std::vector<double> point(T, level);
    std::vector<double> g = model.mask_gradient(prompt, target, point);
    for (std::size_t i = 0; i < T; ++i) acc[i] += g[i];
  }
  TokenScoreVector out;
  out.method = "ig";
  out.scores.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    out.scores[i] = std::fabs(acc[i] / static_cast<double>(steps));
  }
  out.gradient_calls = static_cast<std::uint64_t>(steps);
  return out;
}

AttributionResult to_attribution(const TokenScoreVector& scores,
                                 std::size_t k, std::uint64_t seed) {
  AttributionResult result;
  result.method = scores.method;
  result.explanatory_indices = top_k_indices(scores.scores, k);
  result.final_mask =
      MaskState::from_zero_positions(scores.scores.size(),
                                     result.explanatory_indices);
  result.gradient_calls = scores.gradient_calls;
  result.forward_calls = scores.forward_calls;
  result.seed = seed;
  return result;
}

}  // namespace xattrib
