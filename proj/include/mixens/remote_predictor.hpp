#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mixens/predictor.hpp"
#include "mixens/tokenize.hpp"

namespace mixens {

struct RemoteConfig {
  // Full URL of a completions-style endpoint, e.g.
  // "http://127.0.0.1:8000/v1/completions".
  std::string endpoint;
  std::string model;
  std::chrono::milliseconds timeout{5000};
  int top_logprobs = 5;
  // Name of the environment variable holding the bearer token; empty for no
  // Authorization header.
  std::string auth_env;
  Tokenization tokenization = Tokenization::Char;
};

// Builds a distribution over `vocab` from a top-k logprob listing.
// Probabilities are exp(min(logprob, 0)); tokens outside the vocabulary are
// dropped (word mode also tries the whitespace-trimmed text). The mass not
// covered by returned entries is spread uniformly over the vocabulary entries
// that were not returned; if every entry was returned, or the returned mass
// already reaches one, the returned entries are normalized instead.
Distribution complete_top_logprobs(const VocabularyPtr& vocab,
                                   const std::vector<std::pair<std::string, double>>& top_logprobs,
                                   Tokenization tokenization);

// Request body for one single-token logprob query.
nlohmann::json make_completion_request(const RemoteConfig& config, const std::string& prompt);

// Extracts the first position's top logprobs from a completions response.
// Accepts the legacy completions shape (choices[0].logprobs.top_logprobs[0]
// as a token -> logprob object) and the chat shape
// (choices[0].logprobs.content[0].top_logprobs as [{token, logprob}]).
std::vector<std::pair<std::string, double>> parse_top_logprobs(const nlohmann::json& response);

// Predictor backed by a remote logprobs endpoint. The remote side is
// stateless, so the cache here is bookkeeping only: every predict sends the
// whole detokenized prefix as the prompt. A timed-out request is retried
// once; any other failure raises RemoteError.
class RemotePredictor final : public CachedPredictor {
 public:
  RemotePredictor(VocabularyPtr vocab, RemoteConfig config);

  const RemoteConfig& config() const noexcept { return *config_; }
  std::unique_ptr<TokenPredictor> fork_session() const override;

 protected:
  Distribution next_distribution() const override;

 private:
  RemotePredictor(VocabularyPtr vocab, std::shared_ptr<const RemoteConfig> config);

  std::shared_ptr<const RemoteConfig> config_;
};

}  // namespace mixens
