#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xattrib/search.hpp"

namespace xattrib {

// One explanation laid out for display: the prompt's surface tokens with
// the explanatory positions flagged, plus the generation they explain.
struct HighlightRendering {
  std::vector<std::string> prompt_tokens;
  std::vector<bool> explanatory;  // same length as prompt_tokens
  std::string output_text;
  std::string method;
  std::size_t k = 0;
};

HighlightRendering build_rendering(const std::vector<std::string>& prompt_tokens,
                                   const AttributionResult& result,
                                   const std::string& output_text);

// Inverse-video marks around explanatory tokens; one line for the prompt,
// one for the generation.
std::string render_ansi(const HighlightRendering& rendering);

// Self-contained page, inline styles only, explanatory tokens wrapped in
// <mark> spans. A non-null record_json is embedded verbatim in a <pre>
// block so the page carries the machine-readable result too.
std::string render_html(const HighlightRendering& rendering,
                        const std::string* record_json = nullptr);

std::string html_escape(std::string_view text);

}  // namespace xattrib
