#include "xattrib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

#include "xattrib/tokens.hpp"

namespace xattrib {

namespace {

std::map<std::vector<Token>, int> ngram_counts(const TokenSequence& seq,
                                               int n) {
  std::map<std::vector<Token>, int> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    counts[std::vector<Token>(seq.begin() + i, seq.begin() + i + n)] += 1;
  }
  return counts;
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const MetricsReport& report) {
  nlohmann::ordered_json out;
  out["bleu"] = report.bleu;
  out["rouge_l_precision"] = report.rouge_l_precision;
  out["rouge_l_recall"] = report.rouge_l_recall;
  out["rouge_l_f1"] = report.rouge_l_f1;
  if (report.embedding_similarity.has_value()) {
    out["embedding_similarity"] = *report.embedding_similarity;
  }
  out["pr"] = report.pr;
  out["kl"] = report.kl;
  return out;
}

double bleu(const TokenSequence& candidate, const TokenSequence& reference,
            int max_n) {
  if (candidate.empty() || reference.empty() || max_n < 1) return 0.0;
  int effective = std::min<int>(max_n, static_cast<int>(candidate.size()));
  double log_sum = 0.0;
  for (int n = 1; n <= effective; ++n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    int total = 0;
    int clipped = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) /
                        static_cast<double>(total));
  }
  double geo = std::exp(log_sum / static_cast<double>(effective));
  double c = static_cast<double>(candidate.size());
  double r = static_cast<double>(reference.size());
  double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return geo * brevity;
}

RougeL rouge_l(const TokenSequence& candidate,
               const TokenSequence& reference) {
  RougeL out;
  if (candidate.empty() || reference.empty()) return out;
  const std::size_t m = candidate.size();
  const std::size_t n = reference.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  double lcs = static_cast<double>(prev[n]);
  out.precision = lcs / static_cast<double>(m);
  out.recall = lcs / static_cast<double>(n);
  double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

std::vector<double> BagOfWordsEncoder::encode(std::string_view text) const {
  std::vector<double> counts(dim_, 0.0);
  for (const std::string& word : split_whitespace(text)) {
    counts[fnv1a64(word) % static_cast<std::uint64_t>(dim_)] += 1.0;
  }
  return counts;
}

double embedding_similarity(const SentenceEncoder& encoder,
                            std::string_view text_a, std::string_view text_b) {
  std::vector<double> a = encoder.encode(text_a);
  std::vector<double> b = encoder.encode(text_b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
  }
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double probability_ratio(const ScoredGenerator& model,
                         const TokenSequence& prompt,
                         const TokenSequence& target, const MaskState& mask) {
  double masked = model.log_likelihood(prompt, mask, target);
  double full = model.log_likelihood(prompt, target);
  return std::exp(masked - full);
}

double sequence_kl(const ScoredGenerator& model, const TokenSequence& prompt,
                   const TokenSequence& target, const MaskState& mask) {
  std::vector<std::vector<double>> masked =
      model.position_log_probs(prompt, mask.to_reals(), target);
  std::vector<std::vector<double>> full = model.position_log_probs(
      prompt, std::vector<double>(prompt.size(), 1.0), target);
  double total = 0.0;
  for (std::size_t j = 0; j < masked.size(); ++j) {
    double kl = 0.0;
    for (std::size_t v = 0; v < masked[j].size(); ++v) {
      kl += std::exp(masked[j][v]) * (masked[j][v] - full[j][v]);
    }
    total += kl;
  }
  return masked.empty() ? 0.0 : total / static_cast<double>(masked.size());
}

MetricsReport compute_metrics(const ScoredGenerator& model,
                              const TokenSequence& prompt,
                              const TokenSequence& y,
                              const TokenSequence& y_prime,
                              const MaskState& mask,
                              const SentenceEncoder* encoder) {
  MetricsReport report;
  report.bleu = bleu(y_prime, y);
  RougeL rouge = rouge_l(y_prime, y);
  report.rouge_l_precision = rouge.precision;
  report.rouge_l_recall = rouge.recall;
  report.rouge_l_f1 = rouge.f1;
  if (encoder != nullptr) {
    try {
      report.embedding_similarity =
          embedding_similarity(*encoder, detokenize(y_prime), detokenize(y));
    } catch (const std::exception&) {
      report.embedding_similarity.reset();
    }
  }
  report.pr = probability_ratio(model, prompt, y, mask);
  report.kl = sequence_kl(model, prompt, y, mask);
  return report;
}

}  // namespace xattrib
