#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xattrib/mask.hpp"
#include "xattrib/tokens.hpp"

namespace xattrib {

// How a masked position is presented to the model. zero_embedding scales
// the token embedding by the mask entry and keeps positions aligned, so
// binary evaluation is the exact endpoint of the gradient relaxation.
// remove drops masked tokens and shortens the sequence, which decouples
// the evaluation from the relaxation gradient.
enum class MaskMode { zero_embedding, remove };

// Contract every attribution method scores against. Public methods
// validate arguments, bump the call counters, and forward to the
// do_* hooks; adapters implement only the hooks.
class ScoredGenerator {
 public:
  virtual ~ScoredGenerator() = default;

  virtual std::string name() const = 0;
  virtual int vocabulary_size() const = 0;
  virtual int max_prompt_length() const = 0;
  virtual bool supports_gradient() const = 0;
  // True when concurrent read-only scoring is safe. The harness serializes
  // calls to adapters that return false.
  virtual bool concurrent_safe() const { return true; }

  // Teacher-forced log p(y | point * x). Entries of point lie in [0, 1];
  // a MaskState supplies the binary case and omitting the mask means
  // all-ones. Target must be nonempty.
  double log_likelihood(const TokenSequence& prompt,
                        const std::vector<double>& point,
                        const TokenSequence& target) const;
  double log_likelihood(const TokenSequence& prompt, const MaskState& mask,
                        const TokenSequence& target) const;
  double log_likelihood(const TokenSequence& prompt,
                        const TokenSequence& target) const;

  // Gradient of log p(y | m * x) with respect to m at eval_point, under
  // the embedding-scaling relaxation. Requires supports_gradient.
  std::vector<double> mask_gradient(const TokenSequence& prompt,
                                    const TokenSequence& target,
                                    const std::vector<double>& eval_point) const;

  // Greedy decoding from the masked prompt; stops at end-of-sequence or
  // max_new_tokens, whichever comes first.
  TokenSequence generate(const TokenSequence& prompt, const MaskState& mask,
                         int max_new_tokens) const;
  TokenSequence generate(const TokenSequence& prompt,
                         int max_new_tokens) const;

  // Full next-token log distributions at every target position under
  // teacher forcing, one vocabulary_size() row per position.
  std::vector<std::vector<double>> position_log_probs(
      const TokenSequence& prompt, const std::vector<double>& point,
      const TokenSequence& target) const;

  std::uint64_t forward_call_count() const { return forwards_; }
  std::uint64_t gradient_call_count() const { return gradients_; }
  void reset_call_counts() const { forwards_ = 0; gradients_ = 0; }

 protected:
  virtual double do_log_likelihood(const TokenSequence& prompt,
                                   const std::vector<double>& point,
                                   const TokenSequence& target) const = 0;
  virtual std::vector<double> do_mask_gradient(
      const TokenSequence& prompt, const TokenSequence& target,
      const std::vector<double>& eval_point) const = 0;
  virtual TokenSequence do_generate(const TokenSequence& prompt,
                                    const std::vector<double>& point,
                                    int max_new_tokens) const = 0;
  virtual std::vector<std::vector<double>> do_position_log_probs(
      const TokenSequence& prompt, const std::vector<double>& point,
      const TokenSequence& target) const = 0;

 private:
  void check_prompt(const TokenSequence& prompt) const;
  void check_point(const TokenSequence& prompt,
                   const std::vector<double>& point) const;
  std::vector<double> all_ones_point(const TokenSequence& prompt) const;

  mutable std::atomic<std::uint64_t> forwards_{0};
  mutable std::atomic<std::uint64_t> gradients_{0};
};

struct AdapterParams {
  std::uint64_t seed = 7;
  // Resolved from XATTRIB_CACHE_DIR; empty when unset. Toy adapters have
  // nothing to cache and ignore it.
  std::string cache_dir;
};

using AdapterFactory =
    std::function<std::unique_ptr<ScoredGenerator>(const AdapterParams&)>;

// Registry keyed by adapter name. Built-ins: "toy-controlled" (generic
// seeded weights), "toy-eval" (fixed evaluation-suite construction) and
// "toy-bigram" (tabular, no gradient support).
void register_adapter(const std::string& name, AdapterFactory factory);
std::unique_ptr<ScoredGenerator> make_adapter(const std::string& name,
                                              std::uint64_t seed);
std::vector<std::string> registered_adapters();

// $XATTRIB_CACHE_DIR, or empty when unset.
std::string cache_directory();

}  // namespace xattrib
