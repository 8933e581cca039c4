#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mixens/core.hpp"

namespace mixens {

// Work charged to a predictor. Receipts are additive across calls.
struct WorkReceipt {
  std::uint64_t decode_forwards = 0;
  std::uint64_t prefill_tokens = 0;

  WorkReceipt& operator+=(const WorkReceipt& other) {
    decode_forwards += other.decode_forwards;
    prefill_tokens += other.prefill_tokens;
    return *this;
  }
  friend WorkReceipt operator+(WorkReceipt a, const WorkReceipt& b) { return a += b; }
  friend WorkReceipt operator-(const WorkReceipt& a, const WorkReceipt& b) {
    return {a.decode_forwards - b.decode_forwards, a.prefill_tokens - b.prefill_tokens};
  }
  friend bool operator==(const WorkReceipt&, const WorkReceipt&) = default;
};

// Next-token predictor with an explicit KV-cache model.
//
// The cache holds the token prefix the predictor has already processed. A
// decode forward (predict) reads the distribution for the token following the
// cached content; prefill (extend_cache) appends known tokens without reading
// a distribution. The token sampled right after a decode forward is appended
// free of charge with accept_token: a real engine feeds it as the input of the
// next decode forward, so it never needs a separate prefill.
//
// The cache is an optimization only. predict after extend_cache always
// equals predict on a fresh session prefilled with the whole prefix.
class TokenPredictor {
 public:
  virtual ~TokenPredictor() = default;

  virtual const VocabularyPtr& vocab() const = 0;

  // One decode forward. `prefix` must equal the cached content exactly;
  // anything else throws CacheDesync.
  virtual Distribution predict(std::span<const TokenId> prefix) = 0;

  // Prefill `segment`, which must start at position `start` == cached_length()
  // (GapError otherwise). An empty segment is a no-op.
  virtual WorkReceipt extend_cache(std::size_t start, std::span<const TokenId> segment) = 0;

  // Appends the token sampled after the most recent decode forward.
  // Throws CacheDesync unless the previous cache operation was predict.
  virtual void accept_token(TokenId token) = 0;

  virtual std::size_t cached_length() const = 0;
  virtual std::span<const TokenId> cached_tokens() const = 0;

  // Cumulative work since construction or the last reset.
  virtual WorkReceipt total_work() const = 0;

  // Clears the cache and the work counters.
  virtual void reset() = 0;

  // A fresh session (empty cache, zero work) sharing this predictor's
  // immutable parameters.
  virtual std::unique_ptr<TokenPredictor> fork_session() const = 0;
};

// Shared cache bookkeeping for in-process predictors. Subclasses supply the
// distribution for the current cached content and may keep incremental state
// through on_extend.
class CachedPredictor : public TokenPredictor {
 public:
  explicit CachedPredictor(VocabularyPtr vocab) : vocab_(std::move(vocab)) {}

  const VocabularyPtr& vocab() const override { return vocab_; }
  Distribution predict(std::span<const TokenId> prefix) override;
  WorkReceipt extend_cache(std::size_t start, std::span<const TokenId> segment) override;
  void accept_token(TokenId token) override;
  std::size_t cached_length() const override { return tokens_.size(); }
  std::span<const TokenId> cached_tokens() const override { return tokens_; }
  WorkReceipt total_work() const override { return work_; }
  void reset() override;

 protected:
  virtual Distribution next_distribution() const = 0;
  virtual void on_extend(std::span<const TokenId> appended) { (void)appended; }
  virtual void on_reset() {}

  const std::vector<TokenId>& tokens() const noexcept { return tokens_; }

 private:
  void append(std::span<const TokenId> segment);

  VocabularyPtr vocab_;
  std::vector<TokenId> tokens_;
  WorkReceipt work_;
  bool decode_pending_ = false;
};

}  // namespace mixens
