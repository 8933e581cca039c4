#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "json.hpp"
#include "mixens/predictor.hpp"
#include "mixens/tokenize.hpp"

namespace mixens {

// Additively smoothed n-gram language model:
//
//   P(y | ctx) = (count(ctx, y) + alpha) / (sum_y' count(ctx, y') + alpha * |V|)
//
// where ctx is the last (order - 1) tokens. Contexts never seen in training,
// including prefixes shorter than order - 1, get the uniform distribution
// (this is what the formula gives for alpha > 0, and the chosen fallback for
// alpha == 0).
class NGramModel final : public CachedPredictor {
 public:
  struct Row {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
  };
  using Counts = std::map<std::vector<TokenId>, Row>;

  // Counts every length-`order` window of `corpus`.
  // Throws EmptyCorpus, OrderTooLargeForCorpus, InvalidConfig (order 0 or
  // negative alpha) and VocabMismatch (corpus token outside vocab).
  static std::unique_ptr<NGramModel> train(std::span<const TokenId> corpus, std::size_t order, double alpha,
                                           VocabularyPtr vocab, Tokenization tokenization = Tokenization::Char);

  // {"order", "alpha", "tokenization", "vocab": [...],
  //  "counts": {context-string: {token: count}}}
  // Context strings are the context tokens joined per the tokenization mode.
  static std::unique_ptr<NGramModel> from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  std::size_t order() const noexcept { return params_->order; }
  double alpha() const noexcept { return params_->alpha; }
  Tokenization tokenization() const noexcept { return params_->tokenization; }
  const Counts& counts() const noexcept { return params_->counts; }

  // P(. | context) for an explicit context of exactly order - 1 tokens (or
  // fewer, which counts as unseen).
  Distribution conditional(std::span<const TokenId> context) const;

  std::unique_ptr<TokenPredictor> fork_session() const override;

 protected:
  Distribution next_distribution() const override;
  void on_extend(std::span<const TokenId> appended) override;
  void on_reset() override { context_.clear(); }

 private:
  struct Params {
    std::size_t order;
    double alpha;
    Tokenization tokenization;
    Counts counts;
  };
  NGramModel(VocabularyPtr vocab, std::shared_ptr<const Params> params);

  std::shared_ptr<const Params> params_;
  // Rolling window of the last order - 1 cached tokens.
  std::vector<TokenId> context_;
};

}  // namespace mixens
