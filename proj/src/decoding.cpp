#include "mixens/decoding.hpp"

#include <charconv>

namespace mixens {

EnsembleSpec::EnsembleSpec(std::vector<std::unique_ptr<TokenPredictor>> models, EnsembleWeights weights,
                           AlignmentConfig alignment)
    : models_(std::move(models)), weights_(std::move(weights)), alignment_(alignment) {
  if (models_.empty()) throw Error(ErrorKind::InvalidConfig, "an ensemble needs at least one model");
  if (models_.size() != weights_.size()) {
    throw Error(ErrorKind::InvalidConfig, std::to_string(models_.size()) + " models but " +
                                              std::to_string(weights_.size()) + " weights");
  }
  std::vector<VocabularyPtr> vocabs;
  for (const auto& m : models_) vocabs.push_back(m->vocab());
  unified_ = std::make_shared<const UnifiedVocabulary>(vocabs);
}

EnsembleSpec::EnsembleSpec(std::vector<std::unique_ptr<TokenPredictor>> models, EnsembleWeights weights,
                           std::shared_ptr<const UnifiedVocabulary> unified, AlignmentConfig alignment)
    : models_(std::move(models)), weights_(std::move(weights)), unified_(std::move(unified)), alignment_(alignment) {
  if (models_.size() != weights_.size()) {
    throw Error(ErrorKind::InvalidConfig, std::to_string(models_.size()) + " models but " +
                                              std::to_string(weights_.size()) + " weights");
  }
}

EnsembleSpec EnsembleSpec::fork_session() const { return fork_session(weights_); }

EnsembleSpec EnsembleSpec::fork_session(EnsembleWeights weights) const {
  std::vector<std::unique_ptr<TokenPredictor>> forks;
  forks.reserve(models_.size());
  for (const auto& m : models_) forks.push_back(m->fork_session());
  return EnsembleSpec(std::move(forks), std::move(weights), unified_, alignment_);
}

void EnsembleSpec::reset() {
  for (auto& m : models_) m->reset();
}

std::vector<WorkReceipt> EnsembleSpec::work() const {
  std::vector<WorkReceipt> out;
  out.reserve(models_.size());
  for (const auto& m : models_) out.push_back(m->total_work());
  return out;
}

void KvLedger::record(std::size_t model, std::size_t synced, std::size_t model_length) {
  auto& e = entries_.at(model);
  if (synced < e.synced || model_length < e.model) {
    throw Error(ErrorKind::GapError, "ledger entries only move forward");
  }
  e.synced = synced;
  e.model = model_length;
}

WorkReceipt lazy_sync(std::size_t i, EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger) {
  const std::size_t synced = ledger.synced_length(i);
  const std::size_t model_len = ledger.model_length(i);
  auto& model = spec.model(i);
  if (synced > seq.size()) {
    throw Error(ErrorKind::GapError, "model " + std::to_string(i) + " ledger at " + std::to_string(synced) +
                                         " is ahead of the sequence (" + std::to_string(seq.size()) + ")");
  }
  if (model_len != model.cached_length()) {
    throw Error(ErrorKind::GapError, "model " + std::to_string(i) + " cache holds " +
                                         std::to_string(model.cached_length()) + " tokens, ledger says " +
                                         std::to_string(model_len));
  }
  if (synced == seq.size()) return {};

  std::vector<TokenId> missing;
  missing.reserve(seq.size() - synced);
  for (TokenId t : seq.slice(synced, seq.size())) {
    if (auto mt = spec.unified().to_model(i, t)) missing.push_back(*mt);
  }
  const WorkReceipt receipt = model.extend_cache(model_len, missing);
  ledger.record(i, seq.size(), model_len + missing.size());
  return receipt;
}

Distribution ce_step(EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger) {
  std::vector<double> mixed(spec.vocab()->size(), 0.0);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    lazy_sync(i, spec, seq, ledger);
    auto& model = spec.model(i);
    const Distribution aligned = align(model.predict(model.cached_tokens()), spec.unified(), i, spec.alignment());
    const double lambda = spec.weights()[i];
    for (std::size_t y = 0; y < mixed.size(); ++y) mixed[y] += lambda * aligned[y];
  }
  return Distribution(spec.vocab(), std::move(mixed));
}

Selection me_step(EnsembleSpec& spec, const TokenSequence& seq, KvLedger& ledger, SeededRng& rng) {
  return route_step(RandomRouter(spec.weights()), spec, seq, ledger, rng);
}

void commit_token(EnsembleSpec& spec, TokenSequence& seq, KvLedger& ledger, TokenId token,
                  std::span<const std::size_t> evaluated) {
  for (std::size_t i : evaluated) {
    if (ledger.synced_length(i) != seq.size()) {
      throw Error(ErrorKind::GapError, "model " + std::to_string(i) + " was not synced before committing");
    }
  }
  seq.push_back(token);
  for (std::size_t i : evaluated) {
    std::size_t model_len = ledger.model_length(i);
    if (auto mt = spec.unified().to_model(i, token)) {
      spec.model(i).accept_token(*mt);
      ++model_len;
    }
    ledger.record(i, seq.size(), model_len);
  }
}

Strategy Strategy::parse(std::string_view text) {
  if (text == "ce") return ce();
  if (text == "me") return me();
  if (text == "single") return single(0);
  if (text.starts_with("single:")) {
    auto digits = text.substr(7);
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc{} && ptr == digits.data() + digits.size()) return single(index);
  }
  throw Error(ErrorKind::InvalidConfig, "strategy must be single[:i], ce or me, got '" + std::string(text) + "'");
}

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::Single: return "single";
    case StrategyKind::Ce: return "ce";
    case StrategyKind::Me: return "me";
  }
  return "me";
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::MaxTokens: return "max_tokens";
    case FinishReason::StopToken: return "stop_token";
    case FinishReason::Error: return "error";
  }
  return "error";
}

WorkReceipt StepRecord::total() const {
  WorkReceipt sum;
  for (const auto& r : per_model) sum += r;
  return sum;
}

WorkReceipt GenerationTrace::total() const {
  WorkReceipt sum;
  for (const auto& r : per_model) sum += r;
  return sum;
}

namespace {

void validate(const EnsembleSpec& spec, const TokenSequence& prompt, const GenerationConfig& config) {
  if (config.max_new_tokens < 1) throw Error(ErrorKind::InvalidConfig, "max_new_tokens must be at least 1");
  if (config.greedy && config.strategy.kind != StrategyKind::Ce) {
    throw Error(ErrorKind::GreedyUnsupported,
                "greedy decoding breaks the equivalence between selecting a model and averaging; "
                "use the conventional ensemble (ce) for greedy runs");
  }
  if (config.strategy.kind == StrategyKind::Single && config.strategy.single_index >= spec.size()) {
    throw Error(ErrorKind::InvalidConfig, "single model index out of range");
  }
  if (!same_vocabulary(prompt.vocab(), spec.vocab())) {
    throw Error(ErrorKind::VocabMismatch, "prompt is not over the ensemble's unified vocabulary");
  }
  for (TokenId t : prompt.view()) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (!spec.unified().to_model(i, t)) {
        throw Error(ErrorKind::PromptNotRepresentable,
                    "prompt token '" + spec.vocab()->token(t) + "' is not in model " + std::to_string(i) + "'s vocabulary");
      }
    }
  }
  for (TokenId t : config.stop_tokens) {
    if (t >= spec.vocab()->size()) throw Error(ErrorKind::InvalidConfig, "stop token out of range");
  }
}

}  // namespace

GenerationResult generate(EnsembleSpec& spec, const TokenSequence& prompt, const GenerationConfig& config) {
  validate(spec, prompt, config);

  GenerationResult result;
  auto& trace = result.trace;
  trace.strategy = config.strategy;
  trace.model_count = spec.size();
  trace.prompt.assign(prompt.view().begin(), prompt.view().end());
  trace.per_model.assign(spec.size(), {});
  trace.selections.assign(spec.size(), 0);

  spec.reset();
  KvLedger ledger(spec.size());
  TokenSequence seq = prompt;
  SeededRng rng(config.seed);
  const RandomRouter router(config.strategy.kind == StrategyKind::Single
                                ? EnsembleWeights::one_hot(spec.size(), config.strategy.single_index)
                                : spec.weights());
  std::vector<std::size_t> all_models(spec.size());
  for (std::size_t i = 0; i < all_models.size(); ++i) all_models[i] = i;

  for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
    const auto before = spec.work();
    StepRecord record;
    record.step = step;
    try {
      if (config.strategy.kind == StrategyKind::Ce) {
        const Distribution mixed = ce_step(spec, seq, ledger);
        record.token = config.greedy ? mixed.argmax() : sample_token(mixed, rng);
        commit_token(spec, seq, ledger, record.token, all_models);
      } else {
        const Selection sel = route_step(router, spec, seq, ledger, rng);
        record.token = sel.token;
        record.selected_model = sel.model;
        const std::size_t evaluated[1] = {sel.model};
        commit_token(spec, seq, ledger, sel.token, evaluated);
      }
    } catch (const Error& e) {
      result.error = e;
      trace.finish = FinishReason::Error;
      break;
    }
    const auto after = spec.work();
    record.per_model.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      record.per_model[i] = after[i] - before[i];
      trace.per_model[i] += record.per_model[i];
    }
    if (record.selected_model) {
      ++trace.selections[*record.selected_model];
    } else {
      for (auto& s : trace.selections) ++s;
    }
    record.token_text = spec.vocab()->token(record.token);
    trace.emitted.push_back(record.token);
    const bool stop = config.stop_tokens.contains(record.token);
    trace.steps.push_back(std::move(record));
    if (stop) {
      trace.finish = FinishReason::StopToken;
      break;
    }
  }
  return result;
}

}  // namespace mixens
