#include "xattrib/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "xattrib/errors.hpp"
#include "xattrib/rng.hpp"

namespace xattrib {

// Parameter table tags; tests/oracle/toy_lm_oracle.py uses the same
// numbers, so the two implementations draw identical parameters.
namespace {
constexpr std::uint64_t kTagTokenEmbed = 1;
constexpr std::uint64_t kTagPrevEmbed = 2;
constexpr std::uint64_t kTagReadout = 3;
constexpr std::uint64_t kTagBias = 4;
constexpr std::uint64_t kTagStart = 5;
constexpr std::uint64_t kTagWeight = 6;
constexpr std::uint64_t kTagGroupPattern = 7;
constexpr std::uint64_t kTagStepEmbed = 8;

constexpr std::uint64_t kTagBigramBase = 11;
constexpr std::uint64_t kTagBigramTrans = 12;
constexpr std::uint64_t kTagBigramInfl = 13;
constexpr std::uint64_t kTagBigramStart = 14;

// Steps cached eagerly; later steps are hashed on the fly so generation
// length is not capped by the cache.
constexpr int kStepCache = 256;

double max_entry(const std::vector<double>& z) {
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  return m;
}

double log_sum_exp(const std::vector<double>& z) {
  double m = max_entry(z);
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

bool is_binary(const std::vector<double>& point) {
  for (double m : point) {
    if (m != 0.0 && m != 1.0) return false;
  }
  return true;
}

}  // namespace

ControlledToyLM::ControlledToyLM(std::uint64_t seed, ControlledToyConfig config)
    : seed_(seed), cfg_(std::move(config)) {
  if (cfg_.vocabulary_size < 2 || cfg_.embedding_dim < 1 ||
      cfg_.prompt_capacity < 1) {
    throw contract_error("toy model dimensions must be positive");
  }
  const int V = cfg_.vocabulary_size;
  const int d = cfg_.embedding_dim;
  for (std::size_t g = 0; g < cfg_.redundancy_groups.size(); ++g) {
    for (int i : cfg_.redundancy_groups[g].members) {
      if (i < 0 || i >= cfg_.prompt_capacity) {
        throw contract_error("group member outside prompt capacity");
      }
      if (!grouped_.insert(i).second) {
        throw contract_error("redundancy groups must be disjoint");
      }
    }
  }
  token_embed_.resize(static_cast<std::size_t>(V) * d);
  prev_embed_.resize(static_cast<std::size_t>(V) * d);
  readout_.resize(static_cast<std::size_t>(V) * d);
  for (int v = 0; v < V; ++v) {
    for (int e = 0; e < d; ++e) {
      std::uint64_t idx = static_cast<std::uint64_t>(v) * d + e;
      token_embed_[idx] = sym_param(seed_, kTagTokenEmbed, idx);
      prev_embed_[idx] = sym_param(seed_, kTagPrevEmbed, idx);
      readout_[idx] = sym_param(seed_, kTagReadout, idx);
    }
  }
  bias_.resize(V);
  for (int v = 0; v < V; ++v) bias_[v] = sym_param(seed_, kTagBias, v);
  start_.resize(d);
  for (int e = 0; e < d; ++e) start_[e] = sym_param(seed_, kTagStart, e);
  default_weights_.resize(cfg_.prompt_capacity);
  for (int i = 0; i < cfg_.prompt_capacity; ++i) {
    default_weights_[i] = unit_param(seed_, kTagWeight, i);
  }
  group_patterns_.resize(cfg_.redundancy_groups.size() * d);
  for (std::size_t g = 0; g < cfg_.redundancy_groups.size(); ++g) {
    for (int e = 0; e < d; ++e) {
      group_patterns_[g * d + e] =
          unit_param(seed_, kTagGroupPattern, g * static_cast<std::uint64_t>(d) + e);
    }
  }
  step_embed_.resize(static_cast<std::size_t>(kStepCache) * d);
  for (std::uint64_t idx = 0; idx < step_embed_.size(); ++idx) {
    step_embed_[idx] = sym_param(seed_, kTagStepEmbed, idx);
  }
}

std::string ControlledToyLM::name() const {
  return "toy-controlled(seed " + std::to_string(seed_) + ")";
}

double ControlledToyLM::influence_weight(int position) const {
  if (cfg_.influence_weights.empty()) {
    return default_weights_[position];
  }
  return position < static_cast<int>(cfg_.influence_weights.size())
             ? cfg_.influence_weights[position]
             : 0.0;
}

double ControlledToyLM::gate(const RedundancyGroup& group,
                             const std::vector<double>& point) const {
  double prod = 1.0;
  for (int i : group.members) prod *= 1.0 - point[i];
  double curv = 0.0;
  for (int i : group.members) curv += point[i] * (1.0 - point[i]);
  return (1.0 - prod) + cfg_.gate_curvature * curv;
}

std::vector<double> ControlledToyLM::pooled(
    const TokenSequence& prompt, const std::vector<double>& point) const {
  const int d = cfg_.embedding_dim;
  const std::size_t T = prompt.size();
  std::vector<double> acc(d, 0.0);

  if (cfg_.mask_mode == MaskMode::remove) {
    if (!is_binary(point)) {
      throw contract_error("removal mode requires a binary mask");
    }
    std::size_t kept = 0;
    for (std::size_t i = 0; i < T; ++i) {
      if (point[i] != 1.0) continue;
      ++kept;
      if (grouped_.count(static_cast<int>(i))) continue;
      double w = influence_weight(static_cast<int>(i));
      if (w == 0.0) continue;
      const double* emb = &token_embed_[static_cast<std::size_t>(prompt[i]) * d];
      for (int e = 0; e < d; ++e) acc[e] += w * emb[e];
    }
    for (std::size_t g = 0; g < cfg_.redundancy_groups.size(); ++g) {
      const RedundancyGroup& group = cfg_.redundancy_groups[g];
      bool any_kept = false;
      for (int i : group.members) {
        if (static_cast<std::size_t>(i) < T && point[i] == 1.0) any_kept = true;
      }
      if (!any_kept) continue;
      const double* pat = &group_patterns_[g * d];
      for (int e = 0; e < d; ++e) acc[e] += group.weight * pat[e];
    }
    double denom = static_cast<double>(std::max<std::size_t>(kept, 1));
    for (int e = 0; e < d; ++e) acc[e] /= denom;
    return acc;
  }

  for (std::size_t i = 0; i < T; ++i) {
    if (grouped_.count(static_cast<int>(i))) continue;
    double w = influence_weight(static_cast<int>(i)) * point[i];
    if (w == 0.0) continue;
    const double* emb = &token_embed_[static_cast<std::size_t>(prompt[i]) * d];
    for (int e = 0; e < d; ++e) acc[e] += w * emb[e];
  }
  for (std::size_t g = 0; g < cfg_.redundancy_groups.size(); ++g) {
    const RedundancyGroup& group = cfg_.redundancy_groups[g];
    for (int i : group.members) {
      if (static_cast<std::size_t>(i) >= T) {
        throw contract_error("group member outside this prompt's length");
      }
    }
    double scale = group.weight * gate(group, point);
    const double* pat = &group_patterns_[g * d];
    for (int e = 0; e < d; ++e) acc[e] += scale * pat[e];
  }
  for (int e = 0; e < d; ++e) acc[e] /= static_cast<double>(T);
  return acc;
}

const double* ControlledToyLM::step_embed(int step) const {
  // Non-null only for cached steps; callers fall back to hashing.
  if (step < kStepCache) {
    return &step_embed_[static_cast<std::size_t>(step) * cfg_.embedding_dim];
  }
  return nullptr;
}

std::vector<double> ControlledToyLM::step_logits(
    const std::vector<double>& pooled_ctx, Token prev, bool first,
    int step) const {
  const int V = cfg_.vocabulary_size;
  const int d = cfg_.embedding_dim;
  const double* prev_vec =
      first ? start_.data() : &prev_embed_[static_cast<std::size_t>(prev) * d];
  const double* step_vec = step_embed(step);
  std::vector<double> ctx(d);
  for (int e = 0; e < d; ++e) {
    double s = step_vec
                   ? step_vec[e]
                   : sym_param(seed_, kTagStepEmbed,
                               static_cast<std::uint64_t>(step) * d + e);
    ctx[e] = pooled_ctx[e] + prev_vec[e] + s;
  }
  std::vector<double> z(V);
  for (int v = 0; v < V; ++v) {
    const double* row = &readout_[static_cast<std::size_t>(v) * d];
    double dot = 0.0;
    for (int e = 0; e < d; ++e) dot += row[e] * ctx[e];
    z[v] = cfg_.logit_scale * dot + bias_[v];
  }
  return z;
}

double ControlledToyLM::do_log_likelihood(const TokenSequence& prompt,
                                          const std::vector<double>& point,
                                          const TokenSequence& target) const {
  std::vector<double> ctx = pooled(prompt, point);
  double total = 0.0;
  Token prev = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    std::vector<double> z = step_logits(ctx, prev, j == 0, static_cast<int>(j));
    total += z[target[j]] - log_sum_exp(z);
    prev = target[j];
  }
  return total;
}

std::vector<std::vector<double>> ControlledToyLM::do_position_log_probs(
    const TokenSequence& prompt, const std::vector<double>& point,
    const TokenSequence& target) const {
  std::vector<double> ctx = pooled(prompt, point);
  std::vector<std::vector<double>> rows;
  rows.reserve(target.size());
  Token prev = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    std::vector<double> z = step_logits(ctx, prev, j == 0, static_cast<int>(j));
    double lse = log_sum_exp(z);
    for (double& x : z) x -= lse;
    rows.push_back(std::move(z));
    prev = target[j];
  }
  return rows;
}

TokenSequence ControlledToyLM::do_generate(const TokenSequence& prompt,
                                           const std::vector<double>& point,
                                           int max_new_tokens) const {
  std::vector<double> ctx = pooled(prompt, point);
  TokenSequence out;
  Token prev = 0;
  for (int j = 0; j < max_new_tokens; ++j) {
    std::vector<double> z = step_logits(ctx, prev, j == 0, j);
    int best = 0;
    for (int v = 1; v < cfg_.vocabulary_size; ++v) {
      if (z[v] > z[best]) best = v;
    }
    out.push_back(best);
    if (best == kEosToken) break;
    prev = best;
  }
  return out;
}

std::vector<double> ControlledToyLM::do_mask_gradient(
    const TokenSequence& prompt, const TokenSequence& target,
    const std::vector<double>& eval_point) const {
  const int V = cfg_.vocabulary_size;
  const int d = cfg_.embedding_dim;
  const std::size_t T = prompt.size();
  std::vector<double> ctx = pooled(prompt, eval_point);

  // phi = d(log p)/d(pooled): readout row of each target token minus the
  // probability-weighted mean row, scaled by logit_scale, summed over steps.
  std::vector<double> phi(d, 0.0);
  Token prev = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    std::vector<double> z = step_logits(ctx, prev, j == 0, static_cast<int>(j));
    double lse = log_sum_exp(z);
    std::vector<double> p(V);
    for (int v = 0; v < V; ++v) p[v] = std::exp(z[v] - lse);
    const double* row_y = &readout_[static_cast<std::size_t>(target[j]) * d];
    for (int e = 0; e < d; ++e) {
      double mean_r = 0.0;
      for (int v = 0; v < V; ++v) {
        mean_r += p[v] * readout_[static_cast<std::size_t>(v) * d + e];
      }
      phi[e] += cfg_.logit_scale * (row_y[e] - mean_r);
    }
    prev = target[j];
  }

  std::vector<double> grad(T, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    if (grouped_.count(static_cast<int>(i))) continue;
    double w = influence_weight(static_cast<int>(i));
    if (w == 0.0) continue;
    const double* emb = &token_embed_[static_cast<std::size_t>(prompt[i]) * d];
    double dot = 0.0;
    for (int e = 0; e < d; ++e) dot += phi[e] * emb[e];
    grad[i] = (w / static_cast<double>(T)) * dot;
  }
  for (std::size_t g = 0; g < cfg_.redundancy_groups.size(); ++g) {
    const RedundancyGroup& group = cfg_.redundancy_groups[g];
    const double* pat = &group_patterns_[g * d];
    double dot = 0.0;
    for (int e = 0; e < d; ++e) dot += phi[e] * pat[e];
    for (int i : group.members) {
      double prod = 1.0;
      for (int l : group.members) {
        if (l != i) prod *= 1.0 - eval_point[l];
      }
      double dgate = prod + cfg_.gate_curvature * (1.0 - 2.0 * eval_point[i]);
      grad[i] = (group.weight / static_cast<double>(T)) * dgate * dot;
    }
  }
  return grad;
}

BigramToyLM::BigramToyLM(std::uint64_t seed, BigramToyConfig config)
    : seed_(seed), cfg_(config) {
  if (cfg_.vocabulary_size < 2 || cfg_.prompt_capacity < 1) {
    throw contract_error("toy model dimensions must be positive");
  }
  const int V = cfg_.vocabulary_size;
  base_.resize(V);
  start_.resize(V);
  for (int v = 0; v < V; ++v) {
    base_[v] = sym_param(seed_, kTagBigramBase, v);
    start_[v] = sym_param(seed_, kTagBigramStart, v);
  }
  trans_.resize(static_cast<std::size_t>(V) * V);
  infl_.resize(static_cast<std::size_t>(V) * V);
  for (std::size_t idx = 0; idx < trans_.size(); ++idx) {
    trans_[idx] = sym_param(seed_, kTagBigramTrans, idx);
    infl_[idx] = sym_param(seed_, kTagBigramInfl, idx);
  }
}

std::string BigramToyLM::name() const {
  return "toy-bigram(seed " + std::to_string(seed_) + ")";
}

std::vector<double> BigramToyLM::step_logits(const TokenSequence& prompt,
                                             const std::vector<double>& point,
                                             Token prev, bool first) const {
  const int V = cfg_.vocabulary_size;
  const std::size_t T = prompt.size();
  double denom = static_cast<double>(T);
  if (cfg_.mask_mode == MaskMode::remove) {
    if (!is_binary(point)) {
      throw contract_error("removal mode requires a binary mask");
    }
    std::size_t kept = 0;
    for (double m : point) kept += m == 1.0;
    denom = static_cast<double>(std::max<std::size_t>(kept, 1));
  }
  std::vector<double> z(V);
  for (int v = 0; v < V; ++v) {
    double infl = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
      if (point[i] == 0.0) continue;
      infl += point[i] * infl_[static_cast<std::size_t>(prompt[i]) * V + v];
    }
    double ctx = first ? start_[v]
                       : trans_[static_cast<std::size_t>(prev) * V + v];
    z[v] = base_[v] + ctx + cfg_.influence_scale * infl / denom;
  }
  return z;
}

double BigramToyLM::do_log_likelihood(const TokenSequence& prompt,
                                      const std::vector<double>& point,
                                      const TokenSequence& target) const {
  double total = 0.0;
  Token prev = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    std::vector<double> z = step_logits(prompt, point, prev, j == 0);
    total += z[target[j]] - log_sum_exp(z);
    prev = target[j];
  }
  return total;
}

std::vector<double> BigramToyLM::do_mask_gradient(
    const TokenSequence&, const TokenSequence&,
    const std::vector<double>&) const {
  throw unsupported_capability("toy-bigram has no mask gradient");
}

TokenSequence BigramToyLM::do_generate(const TokenSequence& prompt,
                                       const std::vector<double>& point,
                                       int max_new_tokens) const {
  TokenSequence out;
  Token prev = 0;
  for (int j = 0; j < max_new_tokens; ++j) {
    std::vector<double> z = step_logits(prompt, point, prev, j == 0);
    int best = 0;
    for (int v = 1; v < cfg_.vocabulary_size; ++v) {
      if (z[v] > z[best]) best = v;
    }
    out.push_back(best);
    if (best == kEosToken) break;
    prev = best;
  }
  return out;
}

std::vector<std::vector<double>> BigramToyLM::do_position_log_probs(
    const TokenSequence& prompt, const std::vector<double>& point,
    const TokenSequence& target) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(target.size());
  Token prev = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    std::vector<double> z = step_logits(prompt, point, prev, j == 0);
    double lse = log_sum_exp(z);
    for (double& x : z) x -= lse;
    rows.push_back(std::move(z));
    prev = target[j];
  }
  return rows;
}

ControlledToyConfig eval_suite_config() {
  ControlledToyConfig cfg;
  cfg.prompt_capacity = 24;
  cfg.influence_weights = {0.42, 0.31, 0.0, 0.27, 0.0, 0.48, 0.22, 0.0,
                           0.39, 0.0,  0.45, 0.28, 0.0, 0.36, 0.24, 0.41,
                           0.33, 0.0,  0.26, 0.47, 0.30, 0.44, 0.23, 0.38};
  cfg.influence_weights[2] = 9.0;
  cfg.influence_weights[7] = 8.0;
  cfg.influence_weights[12] = 7.0;
  cfg.influence_weights[17] = 6.0;
  cfg.redundancy_groups = {{{4, 9}, 18.0}};
  return cfg;
}

void register_builtin_adapters() {
  static std::once_flag once;
  std::call_once(once, [] {
    register_adapter("toy-controlled", [](const AdapterParams& p) {
      return std::make_unique<ControlledToyLM>(p.seed);
    });
    register_adapter("toy-eval", [](const AdapterParams& p) {
      return std::make_unique<ControlledToyLM>(p.seed, eval_suite_config());
    });
    register_adapter("toy-bigram", [](const AdapterParams& p) {
      return std::make_unique<BigramToyLM>(p.seed);
    });
  });
}

}  // namespace xattrib
