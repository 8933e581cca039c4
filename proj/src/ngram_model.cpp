#include "mixens/ngram_model.hpp"

#include <cmath>

#include "mixens/error.hpp"

namespace mixens {

NGramModel::NGramModel(VocabularyPtr vocab, std::shared_ptr<const Params> params)
    : CachedPredictor(std::move(vocab)), params_(std::move(params)) {}

namespace {

void check_parameters(std::size_t order, double alpha) {
  if (order < 1) throw Error(ErrorKind::InvalidConfig, "n-gram order must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidConfig, "smoothing alpha must be a finite non-negative number");
  }
}

}  // namespace

std::unique_ptr<NGramModel> NGramModel::train(std::span<const TokenId> corpus, std::size_t order, double alpha,
                                              VocabularyPtr vocab, Tokenization tokenization) {
  check_parameters(order, alpha);
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "training corpus is empty");
  if (corpus.size() < order) {
    throw Error(ErrorKind::OrderTooLargeForCorpus, "corpus of " + std::to_string(corpus.size()) +
                                                       " tokens is shorter than order " + std::to_string(order));
  }
  for (TokenId t : corpus) {
    if (t >= vocab->size()) throw Error(ErrorKind::VocabMismatch, "corpus token id outside vocabulary");
  }
  Params params{order, alpha, tokenization, {}};
  for (std::size_t end = order; end <= corpus.size(); ++end) {
    std::vector<TokenId> context(corpus.begin() + static_cast<std::ptrdiff_t>(end - order),
                                 corpus.begin() + static_cast<std::ptrdiff_t>(end - 1));
    auto [it, inserted] = params.counts.try_emplace(std::move(context));
    if (inserted) it->second.counts.assign(vocab->size(), 0);
    it->second.counts[corpus[end - 1]] += 1;
    it->second.total += 1;
  }
  auto shared = std::make_shared<const Params>(std::move(params));
  return std::unique_ptr<NGramModel>(new NGramModel(std::move(vocab), std::move(shared)));
}

Distribution NGramModel::conditional(std::span<const TokenId> context) const {
  const auto& p = *params_;
  const auto& v = vocab();
  const std::size_t ctx_len = p.order - 1;
  const Row* row = nullptr;
  if (context.size() >= ctx_len) {
    std::vector<TokenId> key(context.end() - static_cast<std::ptrdiff_t>(ctx_len), context.end());
    auto it = p.counts.find(key);
    if (it != p.counts.end() && it->second.total > 0) row = &it->second;
  }
  if (row == nullptr) return Distribution::uniform(v);
  const double denom = static_cast<double>(row->total) + p.alpha * static_cast<double>(v->size());
  std::vector<double> probs(v->size());
  for (std::size_t y = 0; y < probs.size(); ++y) {
    probs[y] = (static_cast<double>(row->counts[y]) + p.alpha) / denom;
  }
  return Distribution(v, std::move(probs));
}

Distribution NGramModel::next_distribution() const { return conditional(context_); }

void NGramModel::on_extend(std::span<const TokenId> appended) {
  const std::size_t ctx_len = params_->order - 1;
  if (ctx_len == 0) return;
  context_.insert(context_.end(), appended.begin(), appended.end());
  if (context_.size() > ctx_len) {
    context_.erase(context_.begin(), context_.end() - static_cast<std::ptrdiff_t>(ctx_len));
  }
}

std::unique_ptr<TokenPredictor> NGramModel::fork_session() const {
  return std::unique_ptr<NGramModel>(new NGramModel(vocab(), params_));
}

nlohmann::json NGramModel::to_json() const {
  const auto& p = *params_;
  const auto& v = *vocab();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [context, row] : p.counts) {
    nlohmann::json entry = nlohmann::json::object();
    for (std::size_t y = 0; y < row.counts.size(); ++y) {
      if (row.counts[y] > 0) entry[v.token(static_cast<TokenId>(y))] = row.counts[y];
    }
    counts[detokenize(v, context, p.tokenization)] = std::move(entry);
  }
  return {
      {"order", p.order},
      {"alpha", p.alpha},
      {"tokenization", std::string(to_string(p.tokenization))},
      {"vocab", v.tokens()},
      {"counts", std::move(counts)},
  };
}

std::unique_ptr<NGramModel> NGramModel::from_json(const nlohmann::json& doc) {
  try {
    Params params{doc.at("order").get<std::size_t>(), doc.at("alpha").get<double>(),
                  parse_tokenization(doc.value("tokenization", std::string("char"))), {}};
    check_parameters(params.order, params.alpha);
    auto vocab = make_vocabulary(doc.at("vocab").get<std::vector<std::string>>());
    for (const auto& [key, entry] : doc.at("counts").items()) {
      auto context_tokens = tokenize(key, params.tokenization);
      if (context_tokens.size() != params.order - 1) {
        throw Error(ErrorKind::InvalidConfig, "context '" + key + "' does not have order - 1 tokens");
      }
      Row row;
      row.counts.assign(vocab->size(), 0);
      for (const auto& [token, count] : entry.items()) {
        const auto c = count.get<std::uint64_t>();
        row.counts[vocab->id(token)] += c;
        row.total += c;
      }
      auto [it, inserted] = params.counts.emplace(encode(*vocab, context_tokens), std::move(row));
      if (!inserted) throw Error(ErrorKind::InvalidConfig, "duplicate context '" + key + "'");
    }
    auto shared = std::make_shared<const Params>(std::move(params));
    return std::unique_ptr<NGramModel>(new NGramModel(std::move(vocab), std::move(shared)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("n-gram model: ") + e.what());
  }
}

}  // namespace mixens
