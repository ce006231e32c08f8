#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "xattrib/model.hpp"

namespace xattrib {

// Token id 0 ends generation in both toy models.
inline constexpr Token kEosToken = 0;

struct RedundancyGroup {
  std::vector<int> members;
  double weight = 1.0;
};

struct ControlledToyConfig {
  int vocabulary_size = 50;
  int embedding_dim = 16;
  // Longest prompt the adapter accepts; default weights exist for every
  // position below it.
  int prompt_capacity = 128;
  // Empty means position i gets the seeded default weight; otherwise the
  // listed values apply and positions beyond the list have weight 0.
  std::vector<double> influence_weights;
  // Disjoint position sets whose pooled contribution is gated by "at
  // least one member unmasked".
  std::vector<RedundancyGroup> redundancy_groups;
  // Smooths the gate between its binary endpoints so group members keep a
  // nonzero gradient at the all-ones mask; vanishes at binary masks.
  double gate_curvature = 0.5;
  double logit_scale = 3.0;
  MaskMode mask_mode = MaskMode::zero_embedding;
};

// Deterministic autoregressive model with planted ground truth. Position i
// contributes weight_i * embed(x_i) to a pooled context vector; each
// redundancy group contributes its pattern vector while any member is
// unmasked. Logits read the pooled context plus previous-token and step
// embeddings. All parameters are hash-derived from the seed; the
// reference implementation is tests/oracle/toy_lm_oracle.py.
class ControlledToyLM final : public ScoredGenerator {
 public:
  explicit ControlledToyLM(std::uint64_t seed,
                           ControlledToyConfig config = {});

  std::string name() const override;
  int vocabulary_size() const override { return cfg_.vocabulary_size; }
  int max_prompt_length() const override { return cfg_.prompt_capacity; }
  bool supports_gradient() const override { return true; }

  std::uint64_t seed() const { return seed_; }
  const ControlledToyConfig& config() const { return cfg_; }
  double influence_weight(int position) const;

 protected:
  double do_log_likelihood(const TokenSequence& prompt,
                           const std::vector<double>& point,
                           const TokenSequence& target) const override;
  std::vector<double> do_mask_gradient(
      const TokenSequence& prompt, const TokenSequence& target,
      const std::vector<double>& eval_point) const override;
  TokenSequence do_generate(const TokenSequence& prompt,
                            const std::vector<double>& point,
                            int max_new_tokens) const override;
  std::vector<std::vector<double>> do_position_log_probs(
      const TokenSequence& prompt, const std::vector<double>& point,
      const TokenSequence& target) const override;

 private:
  double gate(const RedundancyGroup& group,
              const std::vector<double>& point) const;
  std::vector<double> pooled(const TokenSequence& prompt,
                             const std::vector<double>& point) const;
  std::vector<double> step_logits(const std::vector<double>& pooled_ctx,
                                  Token prev, bool first, int step) const;
  const double* step_embed(int step) const;

  std::uint64_t seed_;
  ControlledToyConfig cfg_;
  std::set<int> grouped_;
  // Hash-derived parameter tables, cached at construction. Values are
  // identical to on-demand hashing, lookup is just cheaper.
  std::vector<double> token_embed_;  // V x d
  std::vector<double> prev_embed_;   // V x d
  std::vector<double> readout_;      // V x d
  std::vector<double> bias_;         // V
  std::vector<double> start_;        // d
  std::vector<double> default_weights_;  // prompt_capacity
  std::vector<double> group_patterns_;   // groups x d
  std::vector<double> step_embed_;  // first kStepCache steps; rest hashed
};

struct BigramToyConfig {
  int vocabulary_size = 50;
  int prompt_capacity = 128;
  double influence_scale = 4.0;
  MaskMode mask_mode = MaskMode::zero_embedding;
};

// Tabular model: logits are base + transition(prev) + scaled mean of
// per-prompt-token influence rows. No gradient support, which exercises
// the unsupported-capability paths.
class BigramToyLM final : public ScoredGenerator {
 public:
  explicit BigramToyLM(std::uint64_t seed, BigramToyConfig config = {});

  std::string name() const override;
  int vocabulary_size() const override { return cfg_.vocabulary_size; }
  int max_prompt_length() const override { return cfg_.prompt_capacity; }
  bool supports_gradient() const override { return false; }

 protected:
  double do_log_likelihood(const TokenSequence& prompt,
                           const std::vector<double>& point,
                           const TokenSequence& target) const override;
  std::vector<double> do_mask_gradient(
      const TokenSequence& prompt, const TokenSequence& target,
      const std::vector<double>& eval_point) const override;
  TokenSequence do_generate(const TokenSequence& prompt,
                            const std::vector<double>& point,
                            int max_new_tokens) const override;
  std::vector<std::vector<double>> do_position_log_probs(
      const TokenSequence& prompt, const std::vector<double>& point,
      const TokenSequence& target) const override;

 private:
  std::vector<double> step_logits(const TokenSequence& prompt,
                                  const std::vector<double>& point,
                                  Token prev, bool first) const;

  std::uint64_t seed_;
  BigramToyConfig cfg_;
  std::vector<double> base_;   // V
  std::vector<double> start_;  // V
  std::vector<double> trans_;  // V x V
  std::vector<double> infl_;   // V x V
};

// The fixed model behind the evaluation suite: four high-weight
// positions, one redundancy pair, varied background weights, capacity 24.
ControlledToyConfig eval_suite_config();

// Registers toy-controlled, toy-eval and toy-bigram; idempotent.
void register_builtin_adapters();

}  // namespace xattrib
