#pragma once

// Conventional (average-then-sample) and mixture-like (select-then-sample)
// ensemble decoding over a set of token predictors, with lazy per-model cache
// synchronization and per-step work accounting.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mixens/alignment.hpp"
#include "mixens/core.hpp"
#include "mixens/error.hpp"
#include "mixens/predictor.hpp"

namespace mixens {

// Base models, their weights and the shared output vocabulary. Owns the
// predictors, hence their per-session cache state.
class EnsembleSpec {
 public:
  // Throws InvalidConfig when the model and weight counts differ or there are
  // no models.
  EnsembleSpec(std::vector<std::unique_ptr<TokenPredictor>> models, EnsembleWeights weights,
               AlignmentConfig alignment = AlignmentConfig::all());

  std::size_t size() const noexcept { return models_.size(); }
  TokenPredictor& model(std::size_t i) { return *models_.at(i); }
  const TokenPredictor& model(std::size_t i) const { return *models_.at(i); }
  const EnsembleWeights& weights() const noexcept { return weights_; }
  const UnifiedVocabulary& unified() const noexcept { return *unified_; }
  const VocabularyPtr& vocab() const noexcept { return unified_->vocab(); }
  const AlignmentConfig& alignment() const noexcept { return alignment_; }

  // Independent session over the same parameters, optionally reweighted.
  EnsembleSpec fork_session() const;
  EnsembleSpec fork_session(EnsembleWeights weights) const;

  // Clears every model cache and work counter.
  void reset();
  std::vector<WorkReceipt> work() const;

 private:
  EnsembleSpec(std::vector<std::unique_ptr<TokenPredictor>> models, EnsembleWeights weights,
               std::shared_ptr<const UnifiedVocabulary> unified, AlignmentConfig alignment);

  std::vector<std::unique_ptr<TokenPredictor>> models_;
  EnsembleWeights weights_;
  std::shared_ptr<const UnifiedVocabulary> unified_;
  AlignmentConfig alignment_;
};

// Per-model count of sequence positions whose cache entries exist.
// synced_length is measured in the unified sequence; model_length counts the
// same span in the model's own vocabulary (tokens the model cannot represent
// are skipped when its cache is extended).
class KvLedger {
 public:
  explicit KvLedger(std::size_t models) : entries_(models) {}

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t synced_length(std::size_t model) const { return entries_.at(model).synced; }
  std::size_t model_length(std::size_t model) const { return entries_.at(model).model; }
  void record(std::size_t model, std::size_t synced, std::size_t model_length);

 private:
  struct Entry {
    std::size_t synced = 0;
    std::size_t model = 0;
  };
  std::vector<Entry> entries_;
};

// Brings model `i`'s cache up to the end of `seq` with one forward extend
// over the missing tokens. Throws GapError if the ledger is ahead of the
// sequence or disagrees with the model's cache.
WorkReceipt lazy_sync(std::size_t i, EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger);

// Evaluates every model (one decode forward each) and returns
// sum_i lambda_i * align_i(P_i) over the unified vocabulary.
Distribution ce_step(EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger);

// Token-level router that ignores the input and draws a model index from the
// ensemble weights. Routing with it is the mixture-like ensemble.
class RandomRouter {
 public:
  explicit RandomRouter(EnsembleWeights weights) : weights_(std::move(weights)) {}
  std::size_t route(std::span<const TokenId> prefix, SeededRng& rng) const {
    (void)prefix;
    return sample_index(weights_, rng);
  }

 private:
  EnsembleWeights weights_;
};

struct Selection {
  TokenId token;  // unified vocabulary
  std::size_t model;
};

// One token-level routing step: the router picks a model, that model alone
// is synced and evaluated, and the token is sampled from its aligned
// distribution.
template <typename Router>
Selection route_step(const Router& router, EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger,
                     SeededRng& rng);

// route_step with a RandomRouter over the spec's weights.
Selection me_step(EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger, SeededRng& rng);

// Appends `token` to `seq` and hands it to every model in `evaluated` (those
// that ran a decode forward this step) at no cost. Their ledger entries move
// to the new sequence length.
void commit_token(EnsembleSpec& spec, TokenSequence& seq, KvLedger& ledger, TokenId token,
                  std::span<const std::size_t> evaluated);

enum class StrategyKind { Single, Ce, Me };

struct Strategy {
  StrategyKind kind = StrategyKind::Me;
  std::size_t single_index = 0;

  static Strategy single(std::size_t index) { return {StrategyKind::Single, index}; }
  static Strategy ce() { return {StrategyKind::Ce, 0}; }
  static Strategy me() { return {StrategyKind::Me, 0}; }
  // "single", "single:<i>", "ce" or "me".
  static Strategy parse(std::string_view text);
  std::string name() const;
};

struct GenerationConfig {
  std::size_t max_new_tokens = 16;
  std::set<TokenId> stop_tokens;  // unified vocabulary
  std::uint64_t seed = 0;
  Strategy strategy;
  // Argmax instead of sampling. Rejected for the mixture-like ensemble,
  // whose equivalence to the averaged ensemble only holds under sampling.
  bool greedy = false;
};

enum class FinishReason { MaxTokens, StopToken, Error };
std::string_view to_string(FinishReason reason);

struct StepRecord {
  std::size_t step = 0;
  std::optional<std::size_t> selected_model;  // nullopt: every model ran
  TokenId token = 0;
  std::string token_text;
  std::vector<WorkReceipt> per_model;

  WorkReceipt total() const;
};

struct GenerationTrace {
  Strategy strategy;
  std::size_t model_count = 0;
  std::vector<TokenId> prompt;
  std::vector<TokenId> emitted;
  std::vector<StepRecord> steps;
  std::vector<WorkReceipt> per_model;
  std::vector<std::size_t> selections;
  FinishReason finish = FinishReason::MaxTokens;

  WorkReceipt total() const;
};

struct GenerationResult {
  GenerationTrace trace;
  std::optional<Error> error;  // set when a step failed; trace is partial
};

// Runs the decoding loop from a fresh session. Rejects (throws) before the
// first step on an invalid configuration: greedy with the mixture-like
// ensemble, a prompt token missing from some model's vocabulary, or
// max_new_tokens == 0. Errors raised by predictors mid-generation end the
// loop and are returned alongside the partial trace.
GenerationResult generate(EnsembleSpec& spec, const TokenSequence& prompt, const GenerationConfig& config);

// ---------------------------------------------------------------------------

template <typename Router>
Selection route_step(const Router& router, EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger,
                     SeededRng& rng) {
  const std::size_t i = router.route(seq.view(), rng);
  lazy_sync(i, spec, seq, ledger);
  auto& model = spec.model(i);
  const Distribution aligned = align(model.predict(model.cached_tokens()), spec.unified(), i, spec.alignment());
  return {sample_token(aligned, rng), i};
}

}  // namespace mixens
