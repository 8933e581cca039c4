#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "mixens/core.hpp"

namespace mixens {

// Union of several model vocabularies, ordered by first appearance, with one
// injective index map per model. Token identity is exact string equality.
class UnifiedVocabulary {
 public:
  explicit UnifiedVocabulary(const std::vector<VocabularyPtr>& vocabs);

  const VocabularyPtr& vocab() const noexcept { return vocab_; }
  std::size_t model_count() const noexcept { return to_unified_.size(); }
  const VocabularyPtr& model_vocab(std::size_t model) const { return model_vocabs_.at(model); }

  // Model-vocabulary index -> unified index.
  TokenId to_unified(std::size_t model, TokenId model_token) const;
  const std::vector<TokenId>& index_map(std::size_t model) const { return to_unified_.at(model); }
  // Unified index -> model-vocabulary index, if the model has the token.
  std::optional<TokenId> to_model(std::size_t model, TokenId unified_token) const;

  // True when the model's vocabulary is the unified vocabulary in the same
  // order.
  bool is_identity(std::size_t model) const { return identity_.at(model); }

 private:
  VocabularyPtr vocab_;
  std::vector<VocabularyPtr> model_vocabs_;
  std::vector<std::vector<TokenId>> to_unified_;
  std::vector<std::vector<std::optional<TokenId>>> to_model_;
  std::vector<bool> identity_;
};

UnifiedVocabulary build_unified(const std::vector<VocabularyPtr>& vocabs);

struct AlignmentConfig {
  // nullopt keeps every entry ("all").
  std::optional<std::size_t> top_k;

  static AlignmentConfig all() { return {}; }
  static AlignmentConfig keep(std::size_t k);
  // "all" or a positive integer; throws InvalidConfig otherwise.
  static AlignmentConfig parse(std::string_view text);
};

// Keeps the top_k entries of `dist` (ties to the lower index), renormalizes
// and scatters onto the unified vocabulary.
// Throws VocabMismatch when `dist` is not over model `model`'s vocabulary.
Distribution align(const Distribution& dist, const UnifiedVocabulary& unified, std::size_t model,
                   const AlignmentConfig& config);

// Top-k truncation and renormalization within one vocabulary.
Distribution truncate_top_k(const Distribution& dist, std::size_t k);

}  // namespace mixens
