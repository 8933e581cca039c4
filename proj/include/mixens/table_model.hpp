#pragma once

#include <map>
#include <memory>
#include <vector>

#include "json.hpp"
#include "mixens/predictor.hpp"

namespace mixens {

// Fixed lookup-table predictor. The context is the last `order` tokens of the
// prefix; a context missing from the table (or a prefix shorter than the
// order) falls back to the default distribution. Order 0 ignores the prefix.
class TableModel final : public CachedPredictor {
 public:
  using Table = std::map<std::vector<TokenId>, Distribution>;

  TableModel(Distribution fallback, std::size_t order = 0, Table table = {});

  static std::unique_ptr<TableModel> context_free(Distribution dist);

  // {"vocab": [...], "order": k, "default": [...],
  //  "table": [{"context": [tokens...], "probs": [...]}, ...]}
  static std::unique_ptr<TableModel> from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  std::size_t order() const noexcept { return params_->order; }
  // Pure lookup for an explicit prefix.
  const Distribution& lookup(std::span<const TokenId> prefix) const;

  std::unique_ptr<TokenPredictor> fork_session() const override;

 protected:
  Distribution next_distribution() const override { return lookup(tokens()); }

 private:
  struct Params {
    std::size_t order;
    Distribution fallback;
    Table table;
  };
  explicit TableModel(std::shared_ptr<const Params> params);

  std::shared_ptr<const Params> params_;
};

}  // namespace mixens
