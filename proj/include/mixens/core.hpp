#pragma once

// Foundational value types shared by every strategy: vocabularies, token
// sequences, categorical distributions, ensemble weights and the seeded
// generator that drives all stochastic choices.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mixens {

using TokenId = std::uint32_t;

// Absolute tolerance for the simplex check on distributions and weights.
inline constexpr double kSimplexTolerance = 1e-9;

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  // Vocabulary whose tokens are the decimal strings "0", "1", ..., "n-1".
  static std::shared_ptr<const Vocabulary> indexed(std::size_t size);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;  // throws VocabMismatch when absent
  std::optional<TokenId> find(std::string_view token) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

using VocabularyPtr = std::shared_ptr<const Vocabulary>;

VocabularyPtr make_vocabulary(std::vector<std::string> tokens);

// True when both pointers name the same vocabulary or equal token lists.
bool same_vocabulary(const VocabularyPtr& a, const VocabularyPtr& b);

// Append-only token index sequence bound to a vocabulary.
class TokenSequence {
 public:
  explicit TokenSequence(VocabularyPtr vocab, std::vector<TokenId> tokens = {});

  const VocabularyPtr& vocab() const noexcept { return vocab_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  TokenId operator[](std::size_t i) const { return tokens_[i]; }
  std::span<const TokenId> view() const noexcept { return tokens_; }
  std::span<const TokenId> slice(std::size_t begin, std::size_t end) const;

  void push_back(TokenId token);

 private:
  VocabularyPtr vocab_;
  std::vector<TokenId> tokens_;
};

// Rescales a non-negative vector to sum to one.
// Throws NegativeEntry on any negative entry and ZeroMass on an empty vector
// or one whose entries sum to zero.
std::vector<double> normalize(std::span<const double> weights);

// Validates a probability vector. A sum within kSimplexTolerance of one is
// accepted with values untouched; anything further out is rejected.
void check_simplex(std::span<const double> probs, std::string_view what);

class Distribution {
 public:
  // Throws NegativeEntry, InvalidDistribution or VocabMismatch (length).
  Distribution(VocabularyPtr vocab, std::vector<double> probs);

  // Normalizes arbitrary non-negative weights first.
  static Distribution from_weights(VocabularyPtr vocab, std::span<const double> weights);
  static Distribution point_mass(VocabularyPtr vocab, TokenId token);
  static Distribution uniform(VocabularyPtr vocab);

  const VocabularyPtr& vocab() const noexcept { return vocab_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  // Lowest index attaining the maximum probability.
  TokenId argmax() const;

  Distribution rebind(VocabularyPtr vocab) const;

 private:
  VocabularyPtr vocab_;
  std::vector<double> probs_;
};

class EnsembleWeights {
 public:
  explicit EnsembleWeights(std::vector<double> lambdas);

  static EnsembleWeights from_weights(std::span<const double> weights);
  static EnsembleWeights uniform(std::size_t n);
  // All mass on a single model.
  static EnsembleWeights one_hot(std::size_t n, std::size_t index);

  std::size_t size() const noexcept { return lambdas_.size(); }
  double operator[](std::size_t i) const { return lambdas_[i]; }
  const std::vector<double>& values() const noexcept { return lambdas_; }

 private:
  std::vector<double> lambdas_;
};

// std::mt19937_64 with explicit 64-bit seeding. The engine's output sequence
// is fixed by the C++ standard, and uniform() converts the top 53 bits of one
// draw to a double directly, so draws are identical on every conforming
// platform (std::uniform_real_distribution is not).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Seed for a sub-session, mixed from a base seed and a stream id with the
// SplitMix64 finalizer so nearby ids give unrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Inverse-CDF draw from a probability vector using one uniform. Entries with
// zero probability are never returned.
std::size_t sample_categorical(std::span<const double> probs, SeededRng& rng);

TokenId sample_token(const Distribution& dist, SeededRng& rng);
std::size_t sample_index(const EnsembleWeights& weights, SeededRng& rng);

// Half the L1 distance. Throws VocabMismatch when vocabularies differ.
double tv_distance(const Distribution& a, const Distribution& b);
double tv_distance(std::span<const double> a, std::span<const double> b);

}  // namespace mixens
