#include "mixens/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mixens/error.hpp"

namespace mixens {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw Error(ErrorKind::InvalidConfig, "vocabulary must contain at least one token");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorKind::InvalidConfig, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

VocabularyPtr Vocabulary::indexed(std::size_t size) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) tokens.push_back(std::to_string(i));
  return make_vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw Error(ErrorKind::VocabMismatch, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return find(token).has_value(); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw Error(ErrorKind::VocabMismatch, "token '" + std::string(token) + "' not in vocabulary");
  return *found;
}

VocabularyPtr make_vocabulary(std::vector<std::string> tokens) {
  return std::make_shared<const Vocabulary>(std::move(tokens));
}

bool same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

TokenSequence::TokenSequence(VocabularyPtr vocab, std::vector<TokenId> tokens)
    : vocab_(std::move(vocab)), tokens_(std::move(tokens)) {
  for (TokenId t : tokens_) {
    if (t >= vocab_->size()) {
      throw Error(ErrorKind::VocabMismatch, "token id " + std::to_string(t) + " out of range");
    }
  }
}

std::span<const TokenId> TokenSequence::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > tokens_.size()) {
    throw Error(ErrorKind::GapError, "slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                         ") outside sequence of length " + std::to_string(tokens_.size()));
  }
  return std::span<const TokenId>(tokens_).subspan(begin, end - begin);
}

void TokenSequence::push_back(TokenId token) {
  if (token >= vocab_->size()) {
    throw Error(ErrorKind::VocabMismatch, "token id " + std::to_string(token) + " out of range");
  }
  tokens_.push_back(token);
}

std::vector<double> normalize(std::span<const double> weights) {
  if (weights.empty()) throw Error(ErrorKind::ZeroMass, "cannot normalize an empty vector");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw Error(ErrorKind::NegativeEntry, "entry " + std::to_string(i) + " is " + std::to_string(weights[i]));
    }
    total += weights[i];
  }
  if (total <= 0.0) throw Error(ErrorKind::ZeroMass, "entries sum to zero");
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= total;
  return out;
}

void check_simplex(std::span<const double> probs, std::string_view what) {
  if (probs.empty()) throw Error(ErrorKind::InvalidDistribution, std::string(what) + " is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      std::ostringstream msg;
      msg << what << " entry " << i << " is " << probs[i];
      throw Error(ErrorKind::NegativeEntry, msg.str());
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " sums to " << total;
    throw Error(ErrorKind::InvalidDistribution, msg.str());
  }
}

Distribution::Distribution(VocabularyPtr vocab, std::vector<double> probs)
    : vocab_(std::move(vocab)), probs_(std::move(probs)) {
  if (!vocab_) throw Error(ErrorKind::VocabMismatch, "distribution without vocabulary");
  if (probs_.size() != vocab_->size()) {
    throw Error(ErrorKind::VocabMismatch, "distribution has " + std::to_string(probs_.size()) +
                                              " entries for a vocabulary of " + std::to_string(vocab_->size()));
  }
  check_simplex(probs_, "distribution");
}

Distribution Distribution::from_weights(VocabularyPtr vocab, std::span<const double> weights) {
  return Distribution(std::move(vocab), normalize(weights));
}

Distribution Distribution::point_mass(VocabularyPtr vocab, TokenId token) {
  std::vector<double> probs(vocab->size(), 0.0);
  probs.at(token) = 1.0;
  return Distribution(std::move(vocab), std::move(probs));
}

Distribution Distribution::uniform(VocabularyPtr vocab) {
  const double p = 1.0 / static_cast<double>(vocab->size());
  std::vector<double> probs(vocab->size(), p);
  return Distribution(std::move(vocab), std::move(probs));
}

TokenId Distribution::argmax() const {
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

Distribution Distribution::rebind(VocabularyPtr vocab) const {
  if (!same_vocabulary(vocab, vocab_)) throw Error(ErrorKind::VocabMismatch, "rebind to a different vocabulary");
  return Distribution(std::move(vocab), probs_);
}

EnsembleWeights::EnsembleWeights(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
  check_simplex(lambdas_, "ensemble weights");
}

EnsembleWeights EnsembleWeights::from_weights(std::span<const double> weights) {
  return EnsembleWeights(normalize(weights));
}

EnsembleWeights EnsembleWeights::uniform(std::size_t n) {
  return EnsembleWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

EnsembleWeights EnsembleWeights::one_hot(std::size_t n, std::size_t index) {
  std::vector<double> lambdas(n, 0.0);
  lambdas.at(index) = 1.0;
  return EnsembleWeights(std::move(lambdas));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t sample_categorical(std::span<const double> probs, SeededRng& rng) {
  // Scaling by the actual total keeps sub-tolerance drift from biasing the
  // last bucket.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (target < cumulative) return i;
  }
  return last_positive;
}

TokenId sample_token(const Distribution& dist, SeededRng& rng) {
  return static_cast<TokenId>(sample_categorical(dist.probs(), rng));
}

std::size_t sample_index(const EnsembleWeights& weights, SeededRng& rng) {
  return sample_categorical(weights.values(), rng);
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::VocabMismatch, "distributions differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

double tv_distance(const Distribution& a, const Distribution& b) {
  if (!same_vocabulary(a.vocab(), b.vocab())) throw Error(ErrorKind::VocabMismatch, "distributions over different vocabularies");
  return tv_distance(a.probs(), b.probs());
}

}  // namespace mixens
