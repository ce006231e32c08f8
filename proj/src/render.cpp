#include "xattrib/render.hpp"

#include "xattrib/errors.hpp"

namespace xattrib {

HighlightRendering build_rendering(const std::vector<std::string>& prompt_tokens,
                                   const AttributionResult& result,
                                   const std::string& output_text) {
  HighlightRendering rendering;
  rendering.prompt_tokens = prompt_tokens;
  rendering.explanatory.assign(prompt_tokens.size(), false);
  for (std::size_t i : result.explanatory_indices) {
    if (i >= prompt_tokens.size()) {
      throw contract_error("explanatory index outside the token list");
    }
    rendering.explanatory[i] = true;
  }
  rendering.output_text = output_text;
  rendering.method = result.method;
  rendering.k = result.explanatory_indices.size();
  return rendering;
}

std::string render_ansi(const HighlightRendering& rendering) {
  static const char* kMark = "\x1b[7m";
  static const char* kReset = "\x1b[0m";
  std::string out = "prompt [" + rendering.method +
                    ", k=" + std::to_string(rendering.k) + "]: ";
  for (std::size_t i = 0; i < rendering.prompt_tokens.size(); ++i) {
    if (i > 0) out += ' ';
    if (rendering.explanatory[i]) {
      out += kMark;
      out += rendering.prompt_tokens[i];
      out += kReset;
    } else {
      out += rendering.prompt_tokens[i];
    }
  }
  out += "\noutput: " + rendering.output_text + "\n";
  return out;
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_html(const HighlightRendering& rendering,
                        const std::string* record_json) {
  std::string out =
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>prompt attribution</title>\n</head>\n"
      "<body style=\"font-family: monospace; max-width: 60em; margin: 2em "
      "auto;\">\n";
  out += "<p><b>method:</b> " + html_escape(rendering.method) +
         " &nbsp; <b>k:</b> " + std::to_string(rendering.k) + "</p>\n<p>";
  for (std::size_t i = 0; i < rendering.prompt_tokens.size(); ++i) {
    if (i > 0) out += ' ';
    std::string token = html_escape(rendering.prompt_tokens[i]);
    if (rendering.explanatory[i]) {
      out += "<mark style=\"background: #ffd54d; padding: 0 0.15em;\">" +
             token + "</mark>";
    } else {
      out += token;
    }
  }
  out += "</p>\n<p><b>output:</b> " + html_escape(rendering.output_text) +
         "</p>\n";
  if (record_json != nullptr) {
    out += "<pre style=\"background: #f4f4f4; padding: 1em;\">" +
           html_escape(*record_json) + "</pre>\n";
  }
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace xattrib
