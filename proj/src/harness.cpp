#include "xattrib/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "xattrib/baselines.hpp"
#include "xattrib/errors.hpp"
#include "xattrib/rng.hpp"
#include "xattrib/tokens.hpp"

namespace xattrib {

namespace {

// Domain separators for the per-cell seed chain.
constexpr std::uint64_t kTagSeedId = 1001;
constexpr std::uint64_t kTagSeedMethod = 1002;
constexpr std::uint64_t kTagSeedK = 1003;

const std::vector<std::string> kKnownMethods = {"xprompt", "random", "loo",
                                                "ig", "oracle"};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

AttributionResult identity_result(const std::string& method, std::size_t T,
                                  std::uint64_t seed) {
  AttributionResult result;
  result.method = method;
  result.final_mask = MaskState::all_ones(T);
  result.seed = seed;
  return result;
}

std::string fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

bool is_known_method(const std::string& name) {
  return std::find(kKnownMethods.begin(), kKnownMethods.end(), name) !=
         kKnownMethods.end();
}

const std::vector<std::string>& known_methods() { return kKnownMethods; }

std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& id,
                          const std::string& method, int k) {
  std::uint64_t h = stream_hash(global_seed, kTagSeedId, fnv1a64(id));
  h = stream_hash(h, kTagSeedMethod, fnv1a64(method));
  return stream_hash(h, kTagSeedK, static_cast<std::uint64_t>(k));
}

std::string token_sequence_digest(const TokenSequence& seq) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (Token t : seq) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<std::uint64_t>((static_cast<std::uint32_t>(t) >> (8 * b)) &
                                      0xFF);
      h *= 0x100000001B3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::vector<PromptInstance> ingest(const std::string& path,
                                   const ScoredGenerator& model,
                                   const ExperimentConfig& config,
                                   IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw dataset_error("cannot open dataset " + path);
  IngestStats local;
  std::vector<PromptInstance> instances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++local.lines;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw dataset_error(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("prompt") || !obj["prompt"].is_string()) {
      throw dataset_error("each line needs string fields id and prompt",
                          line_no);
    }
    PromptInstance inst;
    inst.id = obj["id"].get<std::string>();
    inst.prompt_text = obj["prompt"].get<std::string>();
    inst.prompt_tokens =
        tokenize_text(inst.prompt_text, model.vocabulary_size());
    if (static_cast<int>(inst.prompt_tokens.size()) <
        config.min_prompt_length) {
      ++local.skipped_short;
      continue;
    }
    if (static_cast<int>(inst.prompt_tokens.size()) >
        model.max_prompt_length()) {
      ++local.skipped_long;
      continue;
    }
    if (obj.contains("target")) {
      if (!obj["target"].is_array()) {
        throw dataset_error("target must be an array of token ids", line_no);
      }
      try {
        inst.target_tokens = obj["target"].get<TokenSequence>();
      } catch (const nlohmann::json::exception&) {
        throw dataset_error("target must be an array of token ids", line_no);
      }
      try {
        validate_tokens(inst.target_tokens, model.vocabulary_size(), "target");
      } catch (const contract_error& e) {
        throw dataset_error(e.what(), line_no);
      }
    } else {
      inst.target_tokens =
          model.generate(inst.prompt_tokens, config.max_new_tokens);
    }
    instances.push_back(std::move(inst));
    ++local.accepted;
  }
  if (stats != nullptr) *stats = local;
  if (instances.empty()) {
    throw empty_dataset_error("no instance passed ingestion from " + path);
  }
  return instances;
}

AttributionResult run_method(const ScoredGenerator& model,
                             const TokenSequence& prompt,
                             const TokenSequence& target,
                             const std::string& method, std::size_t k,
                             const SearchConfig& search, int ig_steps) {
  if (k == 0) return identity_result(method, prompt.size(), search.rng_seed);
  if (method == "xprompt") {
    return xprompt_search(model, prompt, target, k, search);
  }
  if (method == "random") {
    return random_k(prompt, k, search.rng_seed);
  }
  if (method == "loo") {
    return to_attribution(leave_one_out(model, prompt, target), k,
                          search.rng_seed);
  }
  if (method == "ig") {
    return to_attribution(integrated_gradients(model, prompt, target, ig_steps),
                          k, search.rng_seed);
  }
  if (method == "oracle") {
    OracleResult oracle = brute_force_oracle(model, prompt, target, k);
    AttributionResult result;
    result.method = "oracle";
    result.final_mask = oracle.best_mask;
    result.explanatory_indices = oracle.best_mask.zero_positions();
    result.forward_calls = oracle.evaluations + 1;
    result.seed = search.rng_seed;
    return result;
  }
  throw config_error("methods", "unknown method '" + method + "'");
}

ExperimentOutput run_experiment(const ScoredGenerator& model,
                                const std::vector<PromptInstance>& instances,
                                const ExperimentConfig& config) {
  if (config.methods.empty()) {
    throw config_error("methods", "at least one method is required");
  }
  if (config.k_values.empty()) {
    throw config_error("k", "at least one k value is required");
  }
  if (config.seeds.empty()) {
    throw config_error("seeds", "at least one seed is required");
  }

  struct Accum {
    std::size_t n = 0;
    double bleu = 0, rp = 0, rr = 0, rf = 0, pr = 0, kl = 0;
    double sim = 0;
    std::size_t sim_n = 0;
    double seconds = 0;
  };
  std::map<std::pair<std::string, int>, Accum> accums;
  BagOfWordsEncoder encoder;

  ExperimentOutput output;
  for (const PromptInstance& inst : instances) {
    for (const std::string& method : config.methods) {
      for (int k : config.k_values) {
        for (std::uint64_t grid_seed : config.seeds) {
          SearchConfig search;
          search.iterations = config.iterations;
          search.rng_seed = derive_seed(grid_seed, inst.id, method, k);
          search.temperature = config.temperature;
          try {
            auto t0 = std::chrono::steady_clock::now();
            AttributionResult result =
                run_method(model, inst.prompt_tokens, inst.target_tokens,
                           method, static_cast<std::size_t>(k), search,
                           config.ig_steps);
            TokenSequence y_prime = model.generate(
                inst.prompt_tokens, result.final_mask, config.max_new_tokens);
            MetricsReport metrics = compute_metrics(
                model, inst.prompt_tokens, inst.target_tokens, y_prime,
                result.final_mask, &encoder);
            auto t1 = std::chrono::steady_clock::now();

            nlohmann::ordered_json record;
            record["id"] = inst.id;
            record["method"] = method;
            record["k"] = k;
            record["seed"] = grid_seed;
            record["indices"] = result.explanatory_indices;
            record["trace"] = result.loglik_trace;
            record["gradient_calls"] = result.gradient_calls;
            record["forward_calls"] = result.forward_calls;
            record["y"] = inst.target_tokens;
            record["y_prime"] = y_prime;
            record["y_hash"] = token_sequence_digest(inst.target_tokens);
            record["metrics"] = metrics_to_json(metrics);
            output.records.push_back(std::move(record));

            Accum& acc = accums[{method, k}];
            acc.n += 1;
            acc.bleu += metrics.bleu;
            acc.rp += metrics.rouge_l_precision;
            acc.rr += metrics.rouge_l_recall;
            acc.rf += metrics.rouge_l_f1;
            acc.pr += metrics.pr;
            acc.kl += metrics.kl;
            if (metrics.embedding_similarity.has_value()) {
              acc.sim += *metrics.embedding_similarity;
              acc.sim_n += 1;
            }
            acc.seconds +=
                std::chrono::duration<double>(t1 - t0).count();
          } catch (const std::exception& e) {
            output.failure_notes.push_back(inst.id + "/" + method +
                                           "/k=" + std::to_string(k) + ": " +
                                           e.what());
          }
        }
      }
    }
  }

  for (const std::string& method : config.methods) {
    for (int k : config.k_values) {
      auto it = accums.find({method, k});
      if (it == accums.end()) continue;
      const Accum& acc = it->second;
      AggregateRow row;
      row.method = method;
      row.k = k;
      row.records = acc.n;
      double n = static_cast<double>(acc.n);
      row.bleu = acc.bleu / n;
      row.rouge_l_precision = acc.rp / n;
      row.rouge_l_recall = acc.rr / n;
      row.rouge_l_f1 = acc.rf / n;
      if (acc.sim_n > 0) {
        row.embedding_similarity = acc.sim / static_cast<double>(acc.sim_n);
      }
      row.pr = acc.pr / n;
      row.kl = acc.kl / n;
      row.seconds_per_instance = acc.seconds / n;
      output.table.rows.push_back(std::move(row));
    }
  }
  output.table.failures = output.failure_notes.size();
  return output;
}

std::vector<PrCurvePoint> run_pr_vs_k(const ScoredGenerator& model,
                                      const std::vector<PromptInstance>& instances,
                                      const ExperimentConfig& config) {
  if (!std::is_sorted(config.k_values.begin(), config.k_values.end())) {
    throw contract_error("k values must be sorted ascending");
  }
  if (config.methods.empty()) {
    throw config_error("methods", "at least one method is required");
  }
  std::vector<PrCurvePoint> points;
  for (const std::string& method : config.methods) {
    for (int k : config.k_values) {
      double total = 0.0;
      std::size_t n = 0;
      for (const PromptInstance& inst : instances) {
        for (std::uint64_t grid_seed : config.seeds) {
          SearchConfig search;
          search.iterations = config.iterations;
          search.rng_seed = derive_seed(grid_seed, inst.id, method, k);
          search.temperature = config.temperature;
          try {
            AttributionResult result =
                run_method(model, inst.prompt_tokens, inst.target_tokens,
                           method, static_cast<std::size_t>(k), search,
                           config.ig_steps);
            total += probability_ratio(model, inst.prompt_tokens,
                                       inst.target_tokens, result.final_mask);
            n += 1;
          } catch (const std::exception&) {
            // Skipped cells shrink the mean's support, mirroring
            // run_experiment's failure policy.
          }
        }
      }
      PrCurvePoint point;
      point.method = method;
      point.k = k;
      point.mean_pr = n > 0 ? total / static_cast<double>(n) : 0.0;
      points.push_back(point);
    }
  }
  return points;
}

std::vector<AblationPoint> run_ablation(const ScoredGenerator& model,
                                        const std::vector<PromptInstance>& instances,
                                        const ExperimentConfig& config) {
  if (!model.supports_gradient()) {
    throw unsupported_capability(model.name() +
                                 " does not expose a mask gradient");
  }
  const std::vector<int>& cps = ablation_checkpoints();
  if (config.iterations < cps.back()) {
    throw contract_error("ablation needs iterations >= " +
                         std::to_string(cps.back()));
  }
  if (config.k_values.empty()) {
    throw config_error("k", "at least one k value is required");
  }
  const int k = config.k_values.front();

  const std::vector<std::pair<std::string, SearchVariant>> variants = {
      {"full", SearchVariant::full},
      {"no_init", SearchVariant::no_gradient_init},
      {"no_prob", SearchVariant::no_probability},
  };
  std::map<std::string, std::vector<double>> sums;
  for (const auto& v : variants) {
    sums[v.first] = std::vector<double>(cps.size(), 0.0);
  }
  std::size_t n = 0;
  for (const PromptInstance& inst : instances) {
    for (std::uint64_t grid_seed : config.seeds) {
      // One derived seed per cell, shared by the three variants so the
      // comparison is paired.
      std::uint64_t cell_seed = derive_seed(grid_seed, inst.id, "ablation", k);
      for (const auto& [name, variant] : variants) {
        SearchConfig search;
        search.iterations = config.iterations;
        search.rng_seed = cell_seed;
        search.temperature = config.temperature;
        search.variant = variant;
        AttributionResult result =
            xprompt_search(model, inst.prompt_tokens, inst.target_tokens,
                           static_cast<std::size_t>(k), search);
        for (std::size_t c = 0; c < cps.size(); ++c) {
          sums[name][c] +=
              result.loglik_trace[static_cast<std::size_t>(cps[c])];
        }
      }
      n += 1;
    }
  }

  std::vector<AblationPoint> points;
  for (const auto& v : variants) {
    for (std::size_t c = 0; c < cps.size(); ++c) {
      AblationPoint point;
      point.variant = v.first;
      point.checkpoint = cps[c];
      point.mean_masked_loglik =
          n > 0 ? sums[v.first][c] / static_cast<double>(n) : 0.0;
      points.push_back(point);
    }
  }
  return points;
}

void write_results_jsonl(const std::vector<nlohmann::ordered_json>& records,
                         const std::string& path) {
  std::ofstream out = open_for_write(path);
  for (const nlohmann::ordered_json& record : records) {
    out << record.dump() << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

void write_aggregate_csv(const AggregateTable& table, const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "method,k,records,bleu,rouge_l_precision,rouge_l_recall,rouge_l_f1,"
         "embedding_similarity,pr,kl,seconds_per_instance\n";
  for (const AggregateRow& row : table.rows) {
    out << row.method << ',' << row.k << ',' << row.records << ','
        << fixed9(row.bleu) << ',' << fixed9(row.rouge_l_precision) << ','
        << fixed9(row.rouge_l_recall) << ',' << fixed9(row.rouge_l_f1) << ',';
    if (row.embedding_similarity.has_value()) {
      out << fixed9(*row.embedding_similarity);
    }
    out << ',' << fixed9(row.pr) << ',' << fixed9(row.kl) << ','
        << fixed9(row.seconds_per_instance) << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

void write_pr_vs_k_csv(const std::vector<PrCurvePoint>& points,
                       const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "method,k,mean_pr\n";
  for (const PrCurvePoint& point : points) {
    out << point.method << ',' << point.k << ',' << fixed9(point.mean_pr)
        << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

void write_ablation_csv(const std::vector<AblationPoint>& points,
                        const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "variant,checkpoint,mean_masked_loglik\n";
  for (const AblationPoint& point : points) {
    out << point.variant << ',' << point.checkpoint << ','
        << fixed9(point.mean_masked_loglik) << '\n';
  }
  if (!out) throw io_error("write failed for " + path);
}

std::string format_aggregate(const AggregateTable& table) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %3s %7s %7s %8s %8s %8s %7s %7s %7s %9s\n",
                "method", "k", "records", "bleu", "rouge_p", "rouge_r",
                "rouge_f1", "emb_sim", "pr", "kl", "sec/inst");
  out += buf;
  for (const AggregateRow& row : table.rows) {
    std::string sim = row.embedding_similarity.has_value()
                          ? [&] {
                              char b[32];
                              std::snprintf(b, sizeof b, "%7.4f",
                                            *row.embedding_similarity);
                              return std::string(b);
                            }()
                          : std::string("      -");
    std::snprintf(buf, sizeof buf,
                  "%-8s %3d %7zu %7.4f %8.4f %8.4f %8.4f %s %7.4f %7.4f %9.4f\n",
                  row.method.c_str(), row.k, row.records, row.bleu,
                  row.rouge_l_precision, row.rouge_l_recall, row.rouge_l_f1,
                  sim.c_str(), row.pr, row.kl, row.seconds_per_instance);
    out += buf;
  }
  if (table.failures > 0) {
    out += "failures: " + std::to_string(table.failures) + "\n";
  }
  return out;
}

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
  auto parse_int = [&](const std::string& v, int min_value) {
    std::size_t pos = 0;
    int parsed = 0;
    try {
      parsed = std::stoi(v, &pos);
    } catch (const std::exception&) {
      throw config_error(key, "expected an integer, got '" + v + "'");
    }
    if (pos != v.size()) {
      throw config_error(key, "expected an integer, got '" + v + "'");
    }
    if (parsed < min_value) {
      throw config_error(key, "value must be >= " + std::to_string(min_value));
    }
    return parsed;
  };
  auto parse_u64 = [&](const std::string& v) {
    std::size_t pos = 0;
    unsigned long long parsed = 0;
    try {
      parsed = std::stoull(v, &pos);
    } catch (const std::exception&) {
      throw config_error(key, "expected an unsigned integer, got '" + v + "'");
    }
    if (pos != v.size()) {
      throw config_error(key, "expected an unsigned integer, got '" + v + "'");
    }
    return static_cast<std::uint64_t>(parsed);
  };

  if (key == "dataset") {
    config.dataset = value;
  } else if (key == "model") {
    config.model = value;
  } else if (key == "model_seed") {
    config.model_seed = parse_u64(value);
  } else if (key == "methods") {
    std::vector<std::string> methods = split_list(value);
    if (methods.empty()) {
      throw config_error(key, "at least one method is required");
    }
    for (const std::string& m : methods) {
      if (!is_known_method(m)) {
        throw config_error(key, "unknown method '" + m + "'");
      }
    }
    config.methods = methods;
  } else if (key == "k") {
    std::vector<int> ks;
    for (const std::string& item : split_list(value)) {
      std::size_t pos = 0;
      int parsed = 0;
      try {
        parsed = std::stoi(item, &pos);
      } catch (const std::exception&) {
        throw config_error(key, "expected integers, got '" + item + "'");
      }
      if (pos != item.size() || parsed < 0) {
        throw config_error(key, "k values must be integers >= 0");
      }
      ks.push_back(parsed);
    }
    if (ks.empty()) throw config_error(key, "at least one k value is required");
    config.k_values = ks;
  } else if (key == "iterations") {
    config.iterations = parse_int(value, 0);
  } else if (key == "seeds") {
    std::vector<std::uint64_t> seeds;
    for (const std::string& item : split_list(value)) {
      seeds.push_back(parse_u64(item));
    }
    if (seeds.empty()) {
      throw config_error(key, "at least one seed is required");
    }
    config.seeds = seeds;
  } else if (key == "max_new_tokens") {
    config.max_new_tokens = parse_int(value, 1);
  } else if (key == "min_prompt_length") {
    config.min_prompt_length = parse_int(value, 0);
  } else if (key == "ig_steps") {
    config.ig_steps = parse_int(value, 1);
  } else if (key == "temperature") {
    char* end = nullptr;
    double parsed = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0' || !(parsed > 0.0)) {
      throw config_error(key, "expected a positive real, got '" + value + "'");
    }
    config.temperature = parsed;
  } else if (key == "output_dir") {
    config.output_dir = value;
  } else {
    throw config_error(key, "unknown key");
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config", "cannot open " + path);
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw config_error(
          stripped, "line " + std::to_string(line_no) + " is not key=value");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw config_error(stripped,
                         "line " + std::to_string(line_no) + " has no key");
    }
    apply_config_entry(config, key, value);
  }
  return config;
}

}  // namespace xattrib
