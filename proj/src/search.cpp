#include "xattrib/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xattrib/errors.hpp"

namespace xattrib {

namespace {

// First index whose cumulative weight exceeds the scaled draw; the final
// index absorbs any floating-point shortfall.
std::size_t categorical(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.next_u01() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (cum > u) return i;
  }
  return weights.size() - 1;
}

std::vector<double> softmax_weights(const std::vector<double>& values,
                                    double temperature) {
  double m = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - m) / temperature);
  }
  return out;
}

std::vector<double> restrict_to(const std::vector<double>& guide,
                                const std::vector<std::size_t>& support) {
  std::vector<double> out(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) out[i] = guide[support[i]];
  return out;
}

std::vector<std::size_t> one_positions(const MaskState& mask) {
  std::vector<std::size_t> ones;
  ones.reserve(mask.one_count());
  for (std::size_t i = 0; i < mask.length(); ++i) {
    if (mask.at(i)) ones.push_back(i);
  }
  return ones;
}

std::vector<std::size_t> uniform_subset(std::size_t length, std::size_t k,
                                        Rng& rng) {
  std::vector<std::size_t> pool(length);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    std::size_t j = rng.next_index(pool.size());
    out.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_search_args(const ScoredGenerator& model,
                       const TokenSequence& prompt,
                       const TokenSequence& target, std::size_t k) {
  if (prompt.empty()) throw contract_error("prompt must be nonempty");
  if (target.empty()) throw contract_error("target must be nonempty");
  if (k > prompt.size()) {
    throw invalid_cardinality("k exceeds the prompt length");
  }
  if (!model.supports_gradient()) {
    throw unsupported_capability(model.name() +
                                 " does not expose a mask gradient");
  }
}

}  // namespace

nlohmann::ordered_json attribution_to_json(const AttributionResult& result,
                                           const std::string& id) {
  nlohmann::ordered_json record;
  record["id"] = id;
  record["method"] = result.method;
  record["k"] = result.explanatory_indices.size();
  record["indices"] = result.explanatory_indices;
  record["trace"] = result.loglik_trace;
  record["gradient_calls"] = result.gradient_calls;
  record["forward_calls"] = result.forward_calls;
  record["seed"] = result.seed;
  return record;
}

double objective(const ScoredGenerator& model, const TokenSequence& prompt,
                 const TokenSequence& target, const MaskState& mask) {
  return model.log_likelihood(prompt, target) -
         model.log_likelihood(prompt, mask, target);
}

MaskState init_mask(const GradientGuide& guide, std::size_t k) {
  const std::size_t T = guide.magnitudes.size();
  if (k > T) throw invalid_cardinality("k exceeds the guide length");
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (guide.magnitudes[a] != guide.magnitudes[b]) {
      return guide.magnitudes[a] > guide.magnitudes[b];
    }
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return MaskState::from_zero_positions(T, order);
}

std::pair<std::size_t, std::size_t> sample_swap(const MaskState& mask,
                                                const GradientGuide& guide,
                                                Rng& rng) {
  if (guide.magnitudes.size() != mask.length()) {
    throw contract_error("guide length must match the mask length");
  }
  if (mask.zero_count() == 0 || mask.one_count() == 0) {
    throw invalid_state("swap needs at least one masked and one kept position");
  }
  std::vector<std::size_t> ones = one_positions(mask);
  std::vector<std::size_t> zeros = mask.zero_positions();
  // An all-equal restriction makes the softmax exactly uniform, so the
  // degenerate all-zero guide needs no separate branch.
  std::vector<double> wl =
      softmax_weights(restrict_to(guide.magnitudes, ones), guide.temperature);
  std::vector<double> wv =
      softmax_weights(restrict_to(guide.magnitudes, zeros), guide.temperature);
  std::size_t l = ones[categorical(wl, rng)];
  std::size_t v = zeros[categorical(wv, rng)];
  return {l, v};
}

AttributionResult xprompt_search(const ScoredGenerator& model,
                                 const TokenSequence& prompt,
                                 const TokenSequence& target, std::size_t k,
                                 const SearchConfig& config) {
  check_search_args(model, prompt, target, k);
  if (config.iterations < 0) {
    throw contract_error("iteration count must be nonnegative");
  }
  if (!(config.temperature > 0.0)) {
    throw contract_error("temperature must be positive");
  }
  const std::size_t T = prompt.size();
  Rng rng(config.rng_seed);

  const std::vector<double> ones_point(T, 1.0);
  std::vector<double> g = model.mask_gradient(prompt, target, ones_point);
  for (double& x : g) x = std::fabs(x);

  // Baseline p(y|x); anchors the objective the loop minimizes and is
  // counted against the forward budget.
  [[maybe_unused]] double baseline = model.log_likelihood(prompt, target);

  MaskState mask = MaskState::all_ones(T);
  if (k > 0) {
    if (config.variant == SearchVariant::no_gradient_init) {
      mask = MaskState::from_zero_positions(T, uniform_subset(T, k, rng));
    } else {
      mask = init_mask(GradientGuide{g, config.temperature}, k);
    }
  }

  GradientGuide guide{g, config.temperature};
  if (config.variant == SearchVariant::no_probability) {
    guide.magnitudes.assign(T, 1.0);
  }

  double cur = model.log_likelihood(prompt, mask, target);
  AttributionResult result;
  result.method = "xprompt";
  result.loglik_trace.reserve(static_cast<std::size_t>(config.iterations) + 1);
  result.loglik_trace.push_back(cur);
  result.gradient_calls = 1;
  result.forward_calls = 2;
  result.seed = config.rng_seed;

  if (k > 0 && k < T) {
    for (int n = 0; n < config.iterations; ++n) {
      auto [l, v] = sample_swap(mask, guide, rng);
      MaskState proposal = mask;
      proposal.swap(l, v);
      double ll = model.log_likelihood(prompt, proposal, target);
      ++result.forward_calls;
      bool accept = config.strict_improvement ? ll < cur : ll <= cur;
      if (accept) {
        mask = proposal;
        cur = ll;
      }
      mask.verify();
      result.loglik_trace.push_back(cur);
    }
  } else {
    // No swap space; the trace still records one entry per iteration.
    for (int n = 0; n < config.iterations; ++n) {
      mask.verify();
      result.loglik_trace.push_back(cur);
    }
  }

  result.final_mask = mask;
  result.explanatory_indices = mask.zero_positions();
  return result;
}

std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr std::uint64_t cap = std::numeric_limits<std::int64_t>::max();
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > cap) return cap;
  }
  return static_cast<std::uint64_t>(r);
}

OracleResult brute_force_oracle(const ScoredGenerator& model,
                                const TokenSequence& prompt,
                                const TokenSequence& target, std::size_t k,
                                std::uint64_t budget) {
  if (prompt.empty()) throw contract_error("prompt must be nonempty");
  if (target.empty()) throw contract_error("target must be nonempty");
  const std::size_t T = prompt.size();
  if (k > T) throw invalid_cardinality("k exceeds the prompt length");
  std::uint64_t count = binomial_capped(T, k);
  if (count > budget) {
    throw oracle_budget_error("subset count " + std::to_string(count) +
                              " exceeds the oracle budget " +
                              std::to_string(budget));
  }

  double ll_full = model.log_likelihood(prompt, target);
  std::vector<std::size_t> combo(k);
  std::iota(combo.begin(), combo.end(), 0);
  OracleResult best{MaskState::all_ones(T),
                    -std::numeric_limits<double>::infinity(), 0};
  while (true) {
    MaskState mask = MaskState::from_zero_positions(T, combo);
    double obj = ll_full - model.log_likelihood(prompt, mask, target);
    ++best.evaluations;
    if (obj > best.best_objective) {
      best.best_objective = obj;
      best.best_mask = mask;
    }
    // Advance to the next combination in lexicographic order.
    if (k == 0) break;
    std::size_t i = k;
    while (i > 0 && combo[i - 1] == T - k + (i - 1)) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
  }
  return best;
}

}  // namespace xattrib
