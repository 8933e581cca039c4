#include "mixens/alignment.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <string>
#include <unordered_map>

#include "mixens/error.hpp"

namespace mixens {

UnifiedVocabulary::UnifiedVocabulary(const std::vector<VocabularyPtr>& vocabs) : model_vocabs_(vocabs) {
  if (vocabs.empty()) throw Error(ErrorKind::InvalidConfig, "cannot unify an empty list of vocabularies");
  std::vector<std::string> tokens;
  std::unordered_map<std::string, TokenId> index;
  to_unified_.reserve(vocabs.size());
  for (const auto& v : vocabs) {
    std::vector<TokenId> map;
    map.reserve(v->size());
    for (const auto& tok : v->tokens()) {
      auto [it, inserted] = index.emplace(tok, static_cast<TokenId>(tokens.size()));
      if (inserted) tokens.push_back(tok);
      map.push_back(it->second);
    }
    to_unified_.push_back(std::move(map));
  }
  // Reuse the first model's vocabulary object when nothing was added so that
  // same-vocabulary ensembles share one pointer.
  vocab_ = tokens.size() == vocabs.front()->size() ? vocabs.front() : make_vocabulary(std::move(tokens));

  to_model_.resize(vocabs.size());
  for (std::size_t m = 0; m < vocabs.size(); ++m) {
    to_model_[m].assign(vocab_->size(), std::nullopt);
    bool identity = vocabs[m]->size() == vocab_->size();
    for (std::size_t i = 0; i < to_unified_[m].size(); ++i) {
      to_model_[m][to_unified_[m][i]] = static_cast<TokenId>(i);
      identity = identity && to_unified_[m][i] == i;
    }
    identity_.push_back(identity);
  }
}

TokenId UnifiedVocabulary::to_unified(std::size_t model, TokenId model_token) const {
  const auto& map = to_unified_.at(model);
  if (model_token >= map.size()) throw Error(ErrorKind::VocabMismatch, "model token id out of range");
  return map[model_token];
}

std::optional<TokenId> UnifiedVocabulary::to_model(std::size_t model, TokenId unified_token) const {
  const auto& map = to_model_.at(model);
  if (unified_token >= map.size()) throw Error(ErrorKind::VocabMismatch, "unified token id out of range");
  return map[unified_token];
}

UnifiedVocabulary build_unified(const std::vector<VocabularyPtr>& vocabs) { return UnifiedVocabulary(vocabs); }

AlignmentConfig AlignmentConfig::keep(std::size_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "top_k must be at least 1");
  return AlignmentConfig{k};
}

AlignmentConfig AlignmentConfig::parse(std::string_view text) {
  if (text == "all") return all();
  std::size_t k = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, k);
  if (ec != std::errc{} || ptr != end || k < 1) {
    throw Error(ErrorKind::InvalidConfig, "top-k must be 'all' or a positive integer, got '" + std::string(text) + "'");
  }
  return keep(k);
}

Distribution truncate_top_k(const Distribution& dist, std::size_t k) {
  if (k >= dist.size()) return dist;
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] > dist[b] || (dist[a] == dist[b] && a < b); });
  std::vector<double> kept(dist.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) kept[order[i]] = dist[order[i]];
  return Distribution::from_weights(dist.vocab(), kept);
}

Distribution align(const Distribution& dist, const UnifiedVocabulary& unified, std::size_t model,
                   const AlignmentConfig& config) {
  if (model >= unified.model_count() || !same_vocabulary(dist.vocab(), unified.model_vocab(model))) {
    throw Error(ErrorKind::VocabMismatch, "distribution is not over model " + std::to_string(model) + "'s vocabulary");
  }
  const Distribution truncated = config.top_k ? truncate_top_k(dist, *config.top_k) : dist;
  if (unified.is_identity(model)) return Distribution(unified.vocab(), truncated.probs());
  std::vector<double> scattered(unified.vocab()->size(), 0.0);
  const auto& map = unified.index_map(model);
  for (std::size_t i = 0; i < map.size(); ++i) scattered[map[i]] = truncated[i];
  return Distribution(unified.vocab(), std::move(scattered));
}

}  // namespace mixens
