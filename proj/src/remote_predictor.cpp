#include "mixens/remote_predictor.hpp"

#include <cmath>
#include <cstdlib>

#include "httplib.h"
#include "mixens/error.hpp"

namespace mixens {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\n\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\n\r");
  return s.substr(first, last - first + 1);
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidConfig, "endpoint '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_timeout(httplib::Error err) {
  return err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout;
}

}  // namespace

Distribution complete_top_logprobs(const VocabularyPtr& vocab,
                                   const std::vector<std::pair<std::string, double>>& top_logprobs,
                                   Tokenization tokenization) {
  std::vector<double> probs(vocab->size(), 0.0);
  std::vector<bool> returned(vocab->size(), false);
  for (const auto& [text, logprob] : top_logprobs) {
    auto id = vocab->find(text);
    if (!id && tokenization == Tokenization::Word) id = vocab->find(trim(text));
    if (!id || std::isnan(logprob)) continue;
    probs[*id] += std::exp(std::min(logprob, 0.0));
    returned[*id] = true;
  }
  double mass = 0.0;
  std::size_t missing = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    mass += probs[i];
    if (!returned[i]) ++missing;
  }
  if (mass <= 0.0) return Distribution::uniform(vocab);
  if (missing > 0 && mass < 1.0) {
    const double share = (1.0 - mass) / static_cast<double>(missing);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!returned[i]) probs[i] = share;
    }
  }
  return Distribution::from_weights(vocab, probs);
}

nlohmann::json make_completion_request(const RemoteConfig& config, const std::string& prompt) {
  return {
      {"model", config.model},
      {"prompt", prompt},
      {"max_tokens", 1},
      {"logprobs", config.top_logprobs},
      {"temperature", 1.0},
  };
}

std::vector<std::pair<std::string, double>> parse_top_logprobs(const nlohmann::json& response) {
  std::vector<std::pair<std::string, double>> out;
  try {
    const auto& logprobs = response.at("choices").at(0).at("logprobs");
    if (logprobs.contains("top_logprobs")) {
      for (const auto& [token, value] : logprobs.at("top_logprobs").at(0).items()) {
        out.emplace_back(token, value.get<double>());
      }
    } else {
      for (const auto& entry : logprobs.at("content").at(0).at("top_logprobs")) {
        out.emplace_back(entry.at("token").get<std::string>(), entry.at("logprob").get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::RemoteError, std::string("malformed logprobs response: ") + e.what());
  }
  return out;
}

RemotePredictor::RemotePredictor(VocabularyPtr vocab, RemoteConfig config)
    : RemotePredictor(std::move(vocab), std::make_shared<const RemoteConfig>(std::move(config))) {}

RemotePredictor::RemotePredictor(VocabularyPtr vocab, std::shared_ptr<const RemoteConfig> config)
    : CachedPredictor(std::move(vocab)), config_(std::move(config)) {
  if (config_->top_logprobs < 1) throw Error(ErrorKind::InvalidConfig, "top_logprobs must be at least 1");
  if (config_->timeout.count() <= 0) throw Error(ErrorKind::InvalidConfig, "timeout must be positive");
  split_url(config_->endpoint);
}

std::unique_ptr<TokenPredictor> RemotePredictor::fork_session() const {
  return std::unique_ptr<RemotePredictor>(new RemotePredictor(vocab(), config_));
}

Distribution RemotePredictor::next_distribution() const {
  const auto& cfg = *config_;
  const auto url = split_url(cfg.endpoint);
  httplib::Client client(url.origin);
  const auto timeout = cfg.timeout;
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!cfg.auth_env.empty()) {
    if (const char* token = std::getenv(cfg.auth_env.c_str())) client.set_bearer_token_auth(token);
  }

  const auto body = make_completion_request(cfg, detokenize(*vocab(), tokens(), cfg.tokenization)).dump();
  httplib::Result result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    result = client.Post(url.path, body, "application/json");
    if (result || !is_timeout(result.error())) break;
  }
  if (!result) {
    throw Error(ErrorKind::RemoteError, "request to " + cfg.endpoint + " failed: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw Error(ErrorKind::RemoteError, "endpoint returned HTTP " + std::to_string(result->status));
  }
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::RemoteError, std::string("response is not JSON: ") + e.what());
  }
  return complete_top_logprobs(vocab(), parse_top_logprobs(response), cfg.tokenization);
}

}  // namespace mixens
