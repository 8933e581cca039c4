#include "mixens/predictor.hpp"

#include <algorithm>
#include <string>

#include "mixens/error.hpp"

namespace mixens {

Distribution CachedPredictor::predict(std::span<const TokenId> prefix) {
  if (prefix.size() != tokens_.size() || !std::equal(prefix.begin(), prefix.end(), tokens_.begin())) {
    throw Error(ErrorKind::CacheDesync, "prefix of length " + std::to_string(prefix.size()) +
                                            " does not match cached content of length " +
                                            std::to_string(tokens_.size()));
  }
  Distribution dist = next_distribution();
  work_.decode_forwards += 1;
  decode_pending_ = true;
  return dist;
}

WorkReceipt CachedPredictor::extend_cache(std::size_t start, std::span<const TokenId> segment) {
  if (start != tokens_.size()) {
    throw Error(ErrorKind::GapError, "segment starts at " + std::to_string(start) + " but cache holds " +
                                         std::to_string(tokens_.size()) + " tokens");
  }
  if (segment.empty()) return {};
  append(segment);
  decode_pending_ = false;
  WorkReceipt receipt{0, segment.size()};
  work_ += receipt;
  return receipt;
}

void CachedPredictor::accept_token(TokenId token) {
  if (!decode_pending_) {
    throw Error(ErrorKind::CacheDesync, "accept_token without a preceding decode forward");
  }
  const TokenId one[1] = {token};
  append(one);
  decode_pending_ = false;
}

void CachedPredictor::reset() {
  tokens_.clear();
  work_ = {};
  decode_pending_ = false;
  on_reset();
}

void CachedPredictor::append(std::span<const TokenId> segment) {
  for (TokenId t : segment) {
    if (t >= vocab_->size()) {
      throw Error(ErrorKind::VocabMismatch, "token id " + std::to_string(t) + " outside predictor vocabulary");
    }
  }
  tokens_.insert(tokens_.end(), segment.begin(), segment.end());
  on_extend(segment);
}

}  // namespace mixens
