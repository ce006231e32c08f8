#include "xattrib/model.hpp"

#include <cstdlib>
#include <map>
#include <mutex>

#include "xattrib/errors.hpp"
#include "xattrib/toy_models.hpp"

namespace xattrib {

void ScoredGenerator::check_prompt(const TokenSequence& prompt) const {
  validate_tokens(prompt, vocabulary_size(), "prompt");
  if (static_cast<int>(prompt.size()) > max_prompt_length()) {
    throw contract_error("prompt length " + std::to_string(prompt.size()) +
                         " exceeds adapter capacity " +
                         std::to_string(max_prompt_length()));
  }
}

void ScoredGenerator::check_point(const TokenSequence& prompt,
                                  const std::vector<double>& point) const {
  if (point.size() != prompt.size()) {
    throw contract_error("mask length " + std::to_string(point.size()) +
                         " does not match prompt length " +
                         std::to_string(prompt.size()));
  }
  for (double m : point) {
    if (!(m >= 0.0 && m <= 1.0)) {
      throw contract_error("mask entries must lie in [0, 1]");
    }
  }
}

std::vector<double> ScoredGenerator::all_ones_point(
    const TokenSequence& prompt) const {
  return std::vector<double>(prompt.size(), 1.0);
}

double ScoredGenerator::log_likelihood(const TokenSequence& prompt,
                                       const std::vector<double>& point,
                                       const TokenSequence& target) const {
  check_prompt(prompt);
  check_point(prompt, point);
  validate_tokens(target, vocabulary_size(), "target");
  forwards_.fetch_add(1, std::memory_order_relaxed);
  return do_log_likelihood(prompt, point, target);
}

double ScoredGenerator::log_likelihood(const TokenSequence& prompt,
                                       const MaskState& mask,
                                       const TokenSequence& target) const {
  return log_likelihood(prompt, mask.to_reals(), target);
}

double ScoredGenerator::log_likelihood(const TokenSequence& prompt,
                                       const TokenSequence& target) const {
  return log_likelihood(prompt, all_ones_point(prompt), target);
}

std::vector<double> ScoredGenerator::mask_gradient(
    const TokenSequence& prompt, const TokenSequence& target,
    const std::vector<double>& eval_point) const {
  if (!supports_gradient()) {
    throw unsupported_capability("adapter '" + name() +
                                 "' does not expose mask gradients");
  }
  check_prompt(prompt);
  check_point(prompt, eval_point);
  validate_tokens(target, vocabulary_size(), "target");
  gradients_.fetch_add(1, std::memory_order_relaxed);
  return do_mask_gradient(prompt, target, eval_point);
}

TokenSequence ScoredGenerator::generate(const TokenSequence& prompt,
                                        const MaskState& mask,
                                        int max_new_tokens) const {
  check_prompt(prompt);
  check_point(prompt, mask.to_reals());
  if (max_new_tokens < 1) {
    throw contract_error("max_new_tokens must be at least 1");
  }
  forwards_.fetch_add(1, std::memory_order_relaxed);
  return do_generate(prompt, mask.to_reals(), max_new_tokens);
}

TokenSequence ScoredGenerator::generate(const TokenSequence& prompt,
                                        int max_new_tokens) const {
  check_prompt(prompt);
  if (max_new_tokens < 1) {
    throw contract_error("max_new_tokens must be at least 1");
  }
  forwards_.fetch_add(1, std::memory_order_relaxed);
  return do_generate(prompt, all_ones_point(prompt), max_new_tokens);
}

std::vector<std::vector<double>> ScoredGenerator::position_log_probs(
    const TokenSequence& prompt, const std::vector<double>& point,
    const TokenSequence& target) const {
  check_prompt(prompt);
  check_point(prompt, point);
  validate_tokens(target, vocabulary_size(), "target");
  forwards_.fetch_add(1, std::memory_order_relaxed);
  return do_position_log_probs(prompt, point, target);
}

namespace {

std::map<std::string, AdapterFactory>& registry() {
  static std::map<std::string, AdapterFactory> adapters;
  return adapters;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void register_adapter(const std::string& name, AdapterFactory factory) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[name] = std::move(factory);
}

std::unique_ptr<ScoredGenerator> make_adapter(const std::string& name,
                                              std::uint64_t seed) {
  register_builtin_adapters();
  AdapterFactory factory;
  {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) {
      std::string known;
      for (const auto& [key, unused] : registry()) {
        if (!known.empty()) known += ", ";
        known += key;
      }
      throw adapter_error("no adapter named '" + name + "' (registered: " +
                          known + ")");
    }
    factory = it->second;
  }
  AdapterParams params;
  params.seed = seed;
  params.cache_dir = cache_directory();
  return factory(params);
}

std::vector<std::string> registered_adapters() {
  register_builtin_adapters();
  std::lock_guard<std::mutex> lock(registry_mutex());
  std::vector<std::string> names;
  names.reserve(registry().size());
  for (const auto& [key, unused] : registry()) names.push_back(key);
  return names;
}

std::string cache_directory() {
  const char* dir = std::getenv("XATTRIB_CACHE_DIR");
  return dir ? std::string(dir) : std::string();
}

}  // namespace xattrib
