#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xattrib/mask.hpp"
#include "xattrib/model.hpp"

namespace xattrib {

struct MetricsReport {
  double bleu = 0.0;
  double rouge_l_precision = 0.0;
  double rouge_l_recall = 0.0;
  double rouge_l_f1 = 0.0;
  // Absent when the sentence encoder failed; serialization omits the field
  // rather than writing a zero.
  std::optional<double> embedding_similarity;
  double pr = 0.0;
  double kl = 0.0;
};

nlohmann::ordered_json metrics_to_json(const MetricsReport& report);

// Geometric mean of clipped n-gram precisions times the brevity penalty,
// no smoothing: any zero precision zeroes the score. The n-gram order is
// capped at the candidate length so short candidates are not vacuously 0;
// either sequence empty gives 0.
double bleu(const TokenSequence& candidate, const TokenSequence& reference,
            int max_n = 4);

struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Longest-common-subsequence overlap; empty input gives all zeros.
RougeL rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual int embedding_dim() const = 0;
  // Deterministic fixed-length encoding.
  virtual std::vector<double> encode(std::string_view text) const = 0;
};

// Hash-bucketed word-count vectors; the zero-dependency fallback encoder.
class BagOfWordsEncoder final : public SentenceEncoder {
 public:
  explicit BagOfWordsEncoder(int dim = 512) : dim_(dim) {}
  int embedding_dim() const override { return dim_; }
  std::vector<double> encode(std::string_view text) const override;

 private:
  int dim_;
};

// Cosine of the two encodings; 0 when either encoding is the zero vector.
double embedding_similarity(const SentenceEncoder& encoder,
                            std::string_view text_a, std::string_view text_b);

// exp(log p(y|m*x) - log p(y|x)), the single exponentiation done last.
double probability_ratio(const ScoredGenerator& model,
                         const TokenSequence& prompt,
                         const TokenSequence& target, const MaskState& mask);

// Mean over target positions of KL(masked next-token distribution ||
// unmasked), teacher-forced on the original target. Nonnegative.
double sequence_kl(const ScoredGenerator& model, const TokenSequence& prompt,
                   const TokenSequence& target, const MaskState& mask);

// Full report for one explanation: candidate y_prime against reference y,
// likelihood shift metrics under the mask. A null encoder or an encoder
// that throws leaves embedding_similarity absent.
MetricsReport compute_metrics(const ScoredGenerator& model,
                              const TokenSequence& prompt,
                              const TokenSequence& y,
                              const TokenSequence& y_prime,
                              const MaskState& mask,
                              const SentenceEncoder* encoder);

}  // namespace xattrib
