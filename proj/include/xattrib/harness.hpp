#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xattrib/metrics.hpp"
#include "xattrib/model.hpp"
#include "xattrib/search.hpp"

namespace xattrib {

struct PromptInstance {
  std::string id;
  std::string prompt_text;  // empty for instances built from raw ids
  TokenSequence prompt_tokens;
  // The model's own greedy generation under the identity mask, computed
  // once at ingest and reused by every method on this instance.
  TokenSequence target_tokens;
};

struct ExperimentConfig {
  std::string dataset;
  std::string model = "toy-controlled";
  std::uint64_t model_seed = 7;
  std::vector<std::string> methods = {"xprompt"};
  std::vector<int> k_values = {3};
  int iterations = 50;
  std::vector<std::uint64_t> seeds = {0};
  int max_new_tokens = 64;
  int min_prompt_length = 15;
  int ig_steps = 32;
  double temperature = 1.0;
  std::string output_dir = ".";
};

// Methods the harness can dispatch; "oracle" is the exhaustive search and
// is practical only at small C(T, k).
bool is_known_method(const std::string& name);
const std::vector<std::string>& known_methods();

// The rng seed a method run actually uses, mixed from the grid seed and
// the cell coordinates so extending the grid never shifts existing cells.
std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& id,
                          const std::string& method, int k);

// Hex digest of the token sequence, recorded with every result so a log
// can prove all methods scored the same frozen y.
std::string token_sequence_digest(const TokenSequence& seq);

struct IngestStats {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t skipped_short = 0;
  std::size_t skipped_long = 0;
};

// JSONL with one {"id": ..., "prompt": ..., "target"?: ...} object per
// line. Prompts under min_prompt_length tokens (or over the model's
// capacity) are skipped and counted; a missing target is frozen from the
// model's greedy generation. Malformed lines raise dataset_error with the
// 1-based line number; an ingest that accepts nothing raises
// empty_dataset_error.
std::vector<PromptInstance> ingest(const std::string& path,
                                   const ScoredGenerator& model,
                                   const ExperimentConfig& config,
                                   IngestStats* stats = nullptr);

// Dispatches one attribution method on one instance. k = 0 short-circuits
// to the identity mask for every method, with no model calls.
AttributionResult run_method(const ScoredGenerator& model,
                             const TokenSequence& prompt,
                             const TokenSequence& target,
                             const std::string& method, std::size_t k,
                             const SearchConfig& search, int ig_steps);

struct AggregateRow {
  std::string method;
  int k = 0;
  std::size_t records = 0;
  double bleu = 0.0;
  double rouge_l_precision = 0.0;
  double rouge_l_recall = 0.0;
  double rouge_l_f1 = 0.0;
  std::optional<double> embedding_similarity;
  double pr = 0.0;
  double kl = 0.0;
  double seconds_per_instance = 0.0;
};

struct AggregateTable {
  std::vector<AggregateRow> rows;
  std::size_t failures = 0;
};

struct ExperimentOutput {
  // One record per instance x method x k x seed, in that nesting order:
  // {id, method, k, seed, indices, trace, gradient_calls, forward_calls,
  //  y, y_prime, y_hash, metrics}. Timing stays out of the records so
  //  repeated runs are byte-identical.
  std::vector<nlohmann::ordered_json> records;
  AggregateTable table;
  std::vector<std::string> failure_notes;
};

// Serial over the grid; a failing cell is noted and skipped, the run
// continues.
ExperimentOutput run_experiment(const ScoredGenerator& model,
                                const std::vector<PromptInstance>& instances,
                                const ExperimentConfig& config);

struct PrCurvePoint {
  std::string method;
  int k = 0;
  double mean_pr = 0.0;
};

// Mean PR per (method, k); requires the k list sorted ascending. k = 0
// scores the identity mask, so every method reports exactly 1.
std::vector<PrCurvePoint> run_pr_vs_k(const ScoredGenerator& model,
                                      const std::vector<PromptInstance>& instances,
                                      const ExperimentConfig& config);

inline const std::vector<int>& ablation_checkpoints() {
  static const std::vector<int> cps = {1, 5, 10, 15, 20, 30, 40, 50};
  return cps;
}

struct AblationPoint {
  std::string variant;  // full | no_init | no_prob
  int checkpoint = 0;
  double mean_masked_loglik = 0.0;
};

// Runs the three search variants with paired seeds per (instance, seed)
// cell and averages the trace at the fixed checkpoints. Requires
// iterations >= the last checkpoint.
std::vector<AblationPoint> run_ablation(const ScoredGenerator& model,
                                        const std::vector<PromptInstance>& instances,
                                        const ExperimentConfig& config);

void write_results_jsonl(const std::vector<nlohmann::ordered_json>& records,
                         const std::string& path);
void write_aggregate_csv(const AggregateTable& table, const std::string& path);
void write_pr_vs_k_csv(const std::vector<PrCurvePoint>& points,
                       const std::string& path);
void write_ablation_csv(const std::vector<AblationPoint>& points,
                        const std::string& path);

// Aligned text table for terminal output.
std::string format_aggregate(const AggregateTable& table);

// key=value lines, # comments, lists comma-separated. Unknown keys raise
// config_error naming the key.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

}  // namespace xattrib
