#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace xattrib {

using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

// Throws contract_error unless every id is in [0, vocabulary_size) and the
// sequence is nonempty. `what` names the argument in the message.
void validate_tokens(const TokenSequence& seq, int vocabulary_size,
                     const char* what);

std::uint64_t fnv1a64(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view text);

// Hash tokenizer for the toy vocabulary: each whitespace word maps to
// 1 + (fnv1a64(word) mod (vocabulary_size - 1)). Id 0 stays reserved for
// end-of-sequence, so text never tokenizes to it.
Token word_to_token(std::string_view word, int vocabulary_size);
TokenSequence tokenize_text(std::string_view text, int vocabulary_size);

// Ids rendered as space-joined decimals, the display form for toy models
// that have no surface vocabulary.
std::string detokenize(const TokenSequence& ids);

}  // namespace xattrib
