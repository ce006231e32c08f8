#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI/CLI11.hpp>

#include "xattrib/baselines.hpp"
#include "xattrib/errors.hpp"
#include "xattrib/harness.hpp"
#include "xattrib/metrics.hpp"
#include "xattrib/render.hpp"
#include "xattrib/search.hpp"
#include "xattrib/tokens.hpp"
#include "xattrib/toy_models.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitEnvironment = 3;

struct ExplainOptions {
  std::string model = "toy-controlled";
  std::uint64_t model_seed = 7;
  std::string prompt;
  std::string prompt_file;
  std::string method = "xprompt";
  int k = 3;
  int iterations = 50;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::string format = "ansi";
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw xattrib::io_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_explain(const ExplainOptions& opt) {
  if (opt.method != "xprompt" && opt.method != "random" &&
      opt.method != "loo" && opt.method != "ig") {
    throw xattrib::config_error(
        "method", "unknown method '" + opt.method +
                      "' (choose xprompt, random, loo or ig)");
  }
  if (opt.format != "ansi" && opt.format != "html" && opt.format != "json") {
    throw xattrib::config_error(
        "format",
        "unknown format '" + opt.format + "' (choose ansi, html or json)");
  }
  if (opt.k < 1) {
    throw xattrib::invalid_cardinality("k must be at least 1");
  }
  if (!opt.prompt.empty() && !opt.prompt_file.empty()) {
    throw xattrib::config_error("prompt",
                                "give either --prompt or --prompt-file");
  }
  std::string text =
      !opt.prompt_file.empty() ? read_text_file(opt.prompt_file) : opt.prompt;
  if (text.empty()) {
    throw xattrib::config_error("prompt", "an input prompt is required");
  }

  auto model = xattrib::make_adapter(opt.model, opt.model_seed);
  std::vector<std::string> words = xattrib::split_whitespace(text);
  xattrib::TokenSequence prompt =
      xattrib::tokenize_text(text, model->vocabulary_size());
  xattrib::TokenSequence target = model->generate(prompt, 64);

  xattrib::SearchConfig search;
  search.iterations = opt.iterations;
  search.rng_seed = opt.seed;
  search.temperature = opt.temperature;
  xattrib::AttributionResult result =
      xattrib::run_method(*model, prompt, target, opt.method,
                          static_cast<std::size_t>(opt.k), search, 32);

  nlohmann::ordered_json record =
      xattrib::attribution_to_json(result, "explain");
  xattrib::HighlightRendering rendering = xattrib::build_rendering(
      words, result, xattrib::detokenize(target));

  if (opt.format == "json") {
    std::cout << record.dump(2) << "\n";
  } else if (opt.format == "html") {
    std::string dumped = record.dump(2);
    std::cout << xattrib::render_html(rendering, &dumped);
  } else {
    std::cout << xattrib::render_ansi(rendering);
    std::cout << record.dump() << "\n";
  }
  return kExitOk;
}

xattrib::ExperimentConfig load_config(const std::string& config_path,
                                      const std::string& dataset_override,
                                      const std::string& output_override) {
  xattrib::ExperimentConfig config =
      xattrib::parse_config_file(config_path);
  if (!dataset_override.empty()) config.dataset = dataset_override;
  if (!output_override.empty()) config.output_dir = output_override;
  if (config.dataset.empty()) {
    throw xattrib::config_error("dataset", "a dataset path is required");
  }
  return config;
}

std::string ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw xattrib::io_error("cannot create output directory " + dir + ": " +
                            ec.message());
  }
  return dir;
}

struct LoadedRun {
  std::unique_ptr<xattrib::ScoredGenerator> model;
  std::vector<xattrib::PromptInstance> instances;
  xattrib::IngestStats stats;
};

LoadedRun load_run(const xattrib::ExperimentConfig& config) {
  LoadedRun run;
  run.model = xattrib::make_adapter(config.model, config.model_seed);
  run.instances =
      xattrib::ingest(config.dataset, *run.model, config, &run.stats);
  return run;
}

void print_ingest(const xattrib::IngestStats& stats) {
  std::cout << "ingested " << stats.accepted << " of " << stats.lines
            << " lines (" << stats.skipped_short << " under min length, "
            << stats.skipped_long << " over capacity)\n";
}

int cmd_evaluate(const std::string& config_path, const std::string& dataset,
                 const std::string& output_dir) {
  xattrib::ExperimentConfig config =
      load_config(config_path, dataset, output_dir);
  LoadedRun run = load_run(config);
  print_ingest(run.stats);
  xattrib::ExperimentOutput output =
      xattrib::run_experiment(*run.model, run.instances, config);
  std::string dir = ensure_output_dir(config.output_dir);
  xattrib::write_results_jsonl(output.records, dir + "/results.jsonl");
  xattrib::write_aggregate_csv(output.table, dir + "/aggregate.csv");
  std::cout << xattrib::format_aggregate(output.table);
  for (const std::string& note : output.failure_notes) {
    std::cerr << "failed cell: " << note << "\n";
  }
  std::cout << "wrote " << dir << "/results.jsonl and " << dir
            << "/aggregate.csv\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& dataset,
               const std::string& output_dir) {
  xattrib::ExperimentConfig config =
      load_config(config_path, dataset, output_dir);
  LoadedRun run = load_run(config);
  print_ingest(run.stats);
  std::vector<xattrib::AblationPoint> points =
      xattrib::run_ablation(*run.model, run.instances, config);
  std::string dir = ensure_output_dir(config.output_dir);
  xattrib::write_ablation_csv(points, dir + "/ablation.csv");
  std::printf("%-8s %10s %s\n", "variant", "checkpoint", "mean_masked_loglik");
  for (const xattrib::AblationPoint& p : points) {
    std::printf("%-8s %10d %18.6f\n", p.variant.c_str(), p.checkpoint,
                p.mean_masked_loglik);
  }
  std::cout << "wrote " << dir << "/ablation.csv\n";
  return kExitOk;
}

int cmd_curves(const std::string& config_path, const std::string& dataset,
               const std::string& output_dir) {
  xattrib::ExperimentConfig config =
      load_config(config_path, dataset, output_dir);
  LoadedRun run = load_run(config);
  print_ingest(run.stats);
  std::vector<xattrib::PrCurvePoint> points =
      xattrib::run_pr_vs_k(*run.model, run.instances, config);
  std::string dir = ensure_output_dir(config.output_dir);
  xattrib::write_pr_vs_k_csv(points, dir + "/pr_vs_k.csv");
  std::printf("%-8s %3s %s\n", "method", "k", "mean_pr");
  for (const xattrib::PrCurvePoint& p : points) {
    std::printf("%-8s %3d %9.6f\n", p.method.c_str(), p.k, p.mean_pr);
  }
  std::cout << "wrote " << dir << "/pr_vs_k.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Counterfactual prompt attribution: which prompt tokens, when masked "
      "together, most reduce the likelihood of the generated output."};
  app.require_subcommand(1);
  app.footer(
      "Environment: XATTRIB_CACHE_DIR points adapters at a cache directory "
      "(toy adapters ignore it).\nExit codes: 0 success, 2 usage or config "
      "error, 3 environment or model error.");

  ExplainOptions explain;
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "Explain one prompt's generation");
  explain_cmd->add_option("--model", explain.model, "Registered adapter name");
  explain_cmd->add_option("--model-seed", explain.model_seed,
                          "Adapter parameter seed");
  explain_cmd->add_option("--prompt", explain.prompt, "Prompt text");
  explain_cmd->add_option("--prompt-file", explain.prompt_file,
                          "Read the prompt from a file");
  explain_cmd->add_option("--method", explain.method,
                          "xprompt | random | loo | ig");
  explain_cmd->add_option("--k", explain.k, "Explanatory token count");
  explain_cmd->add_option("--iterations", explain.iterations,
                          "Search iterations");
  explain_cmd->add_option("--seed", explain.seed, "Search rng seed");
  explain_cmd->add_option("--temperature", explain.temperature,
                          "Proposal softmax temperature");
  explain_cmd->add_option("--format", explain.format, "ansi | html | json");

  std::string config_path, dataset_override, output_override;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file")
        ->required();
    cmd->add_option("--dataset", dataset_override,
                    "Override the config's dataset path");
    cmd->add_option("--output-dir", output_override,
                    "Override the config's output directory");
  };
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Run the attribution grid over a dataset");
  add_run_flags(evaluate_cmd);
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "Compare search variants at fixed checkpoints");
  add_run_flags(ablate_cmd);
  CLI::App* curves_cmd =
      app.add_subcommand("curves", "Mean probability ratio per k");
  add_run_flags(curves_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (explain_cmd->parsed()) return cmd_explain(explain);
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(config_path, dataset_override, output_override);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(config_path, dataset_override, output_override);
    }
    if (curves_cmd->parsed()) {
      return cmd_curves(config_path, dataset_override, output_override);
    }
  } catch (const xattrib::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const xattrib::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const xattrib::dataset_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const xattrib::adapter_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const xattrib::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const xattrib::unsupported_capability& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const xattrib::oracle_budget_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
