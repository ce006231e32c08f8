#include "xattrib/tokens.hpp"

#include <cctype>
#include <string>

#include "xattrib/errors.hpp"

namespace xattrib {

void validate_tokens(const TokenSequence& seq, int vocabulary_size,
                     const char* what) {
  if (seq.empty()) {
    throw contract_error(std::string(what) + " must not be empty");
  }
  for (Token id : seq) {
    if (id < 0 || id >= vocabulary_size) {
      throw contract_error(std::string(what) + " id " + std::to_string(id) +
                           " outside vocabulary of size " +
                           std::to_string(vocabulary_size));
    }
  }
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i > start) {
      words.emplace_back(text.substr(start, i - start));
    }
  }
  return words;
}

Token word_to_token(std::string_view word, int vocabulary_size) {
  if (vocabulary_size < 2) {
    throw contract_error("vocabulary too small for the hash tokenizer");
  }
  return static_cast<Token>(
      1 + fnv1a64(word) % static_cast<std::uint64_t>(vocabulary_size - 1));
}

TokenSequence tokenize_text(std::string_view text, int vocabulary_size) {
  TokenSequence out;
  for (const std::string& word : split_whitespace(text)) {
    out.push_back(word_to_token(word, vocabulary_size));
  }
  return out;
}

std::string detokenize(const TokenSequence& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace xattrib
