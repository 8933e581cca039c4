#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixens/core.hpp"

namespace mixens {

enum class Tokenization { Char, Word };

// "char" | "word"; throws InvalidConfig otherwise.
Tokenization parse_tokenization(std::string_view name);
std::string_view to_string(Tokenization mode);

// Char mode splits UTF-8 text into code points (malformed bytes become
// single-byte tokens). Word mode splits on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text, Tokenization mode);

// Char mode concatenates; word mode joins with single spaces.
std::string detokenize(std::span<const std::string> tokens, Tokenization mode);
std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> ids, Tokenization mode);

// Maps every token to its vocabulary id; throws VocabMismatch on the first
// unknown token.
std::vector<TokenId> encode(const Vocabulary& vocab, std::span<const std::string> tokens);

// Distinct tokens in order of first appearance.
std::vector<std::string> distinct_tokens(std::span<const std::string> tokens);

}  // namespace mixens
