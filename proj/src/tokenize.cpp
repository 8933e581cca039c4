#include "mixens/tokenize.hpp"

#include <unordered_set>

#include "mixens/error.hpp"

namespace mixens {

Tokenization parse_tokenization(std::string_view name) {
  if (name == "char") return Tokenization::Char;
  if (name == "word") return Tokenization::Word;
  throw Error(ErrorKind::InvalidConfig, "tokenization must be 'char' or 'word', got '" + std::string(name) + "'");
}

std::string_view to_string(Tokenization mode) { return mode == Tokenization::Char ? "char" : "word"; }

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text, Tokenization mode) {
  std::vector<std::string> out;
  if (mode == Tokenization::Char) {
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
      bool valid = i + len <= text.size();
      for (std::size_t k = 1; valid && k < len; ++k) {
        valid = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
      }
      if (!valid) len = 1;
      out.emplace_back(text.substr(i, len));
      i += len;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens, Tokenization mode) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mode == Tokenization::Word && i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> ids, Tokenization mode) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (TokenId id : ids) tokens.push_back(vocab.token(id));
  return detokenize(tokens, mode);
}

std::vector<TokenId> encode(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::vector<std::string> distinct_tokens(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : tokens) {
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

}  // namespace mixens
