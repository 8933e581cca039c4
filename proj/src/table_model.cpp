#include "mixens/table_model.hpp"

#include "mixens/error.hpp"

namespace mixens {

TableModel::TableModel(Distribution fallback, std::size_t order, Table table)
    : TableModel(std::make_shared<const Params>(Params{order, std::move(fallback), std::move(table)})) {
  for (const auto& [context, dist] : params_->table) {
    if (context.size() != params_->order) {
      throw Error(ErrorKind::InvalidConfig, "table context length " + std::to_string(context.size()) +
                                                " differs from order " + std::to_string(params_->order));
    }
    for (TokenId t : context) {
      if (t >= vocab()->size()) throw Error(ErrorKind::VocabMismatch, "table context token out of range");
    }
    if (!same_vocabulary(dist.vocab(), vocab())) {
      throw Error(ErrorKind::VocabMismatch, "table entry over a different vocabulary");
    }
  }
}

TableModel::TableModel(std::shared_ptr<const Params> params)
    : CachedPredictor(params->fallback.vocab()), params_(std::move(params)) {}

std::unique_ptr<TableModel> TableModel::context_free(Distribution dist) {
  return std::make_unique<TableModel>(std::move(dist));
}

const Distribution& TableModel::lookup(std::span<const TokenId> prefix) const {
  const auto& p = *params_;
  if (p.order == 0 || prefix.size() < p.order || p.table.empty()) return p.fallback;
  std::vector<TokenId> context(prefix.end() - static_cast<std::ptrdiff_t>(p.order), prefix.end());
  auto it = p.table.find(context);
  return it == p.table.end() ? p.fallback : it->second;
}

std::unique_ptr<TokenPredictor> TableModel::fork_session() const {
  return std::unique_ptr<TableModel>(new TableModel(params_));
}

std::unique_ptr<TableModel> TableModel::from_json(const nlohmann::json& doc) {
  try {
    auto vocab = make_vocabulary(doc.at("vocab").get<std::vector<std::string>>());
    const auto order = doc.value("order", std::size_t{0});
    Distribution fallback(vocab, doc.at("default").get<std::vector<double>>());
    Table table;
    if (doc.contains("table")) {
      for (const auto& entry : doc.at("table")) {
        std::vector<TokenId> context;
        for (const auto& tok : entry.at("context")) context.push_back(vocab->id(tok.get<std::string>()));
        table.emplace(std::move(context), Distribution(vocab, entry.at("probs").get<std::vector<double>>()));
      }
    }
    return std::make_unique<TableModel>(std::move(fallback), order, std::move(table));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("table model: ") + e.what());
  }
}

nlohmann::json TableModel::to_json() const {
  const auto& p = *params_;
  nlohmann::json doc;
  doc["vocab"] = vocab()->tokens();
  doc["order"] = p.order;
  doc["default"] = p.fallback.probs();
  auto table = nlohmann::json::array();
  for (const auto& [context, dist] : p.table) {
    std::vector<std::string> ctx;
    for (TokenId t : context) ctx.push_back(vocab()->token(t));
    table.push_back({{"context", ctx}, {"probs", dist.probs()}});
  }
  doc["table"] = std::move(table);
  return doc;
}

}  // namespace mixens
