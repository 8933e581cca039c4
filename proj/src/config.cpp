#include "mixens/config.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "mixens/ngram_model.hpp"
#include "mixens/table_model.hpp"

namespace mixens {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::InvalidConfig, message); }

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_optional(const json& obj, const char* key, T& target, const std::string& where) {
  if (obj.contains(key)) target = get_field<T>(obj, key, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

ModelDescriptor parse_model(const json& doc, const std::filesystem::path& base, std::size_t index) {
  const std::string where = "models[" + std::to_string(index) + "]";
  ModelDescriptor d;
  const auto kind = get_field<std::string>(doc, "kind", where);
  if (kind == "table") {
    reject_unknown(doc, {"kind", "path", "table"}, where);
    d.kind = ModelKind::Table;
    if (doc.contains("table")) {
      d.inline_table = doc.at("table");
    } else {
      d.path = resolve(base, get_field<std::string>(doc, "path", where));
    }
  } else if (kind == "ngram") {
    reject_unknown(doc, {"kind", "path"}, where);
    d.kind = ModelKind::NGram;
    d.path = resolve(base, get_field<std::string>(doc, "path", where));
  } else if (kind == "remote") {
    reject_unknown(doc, {"kind", "endpoint", "model", "timeout_ms", "top_logprobs", "auth_env", "tokenization", "vocab",
                         "vocab_path"},
                   where);
    d.kind = ModelKind::Remote;
    d.remote.endpoint = get_field<std::string>(doc, "endpoint", where);
    d.remote.model = get_field<std::string>(doc, "model", where);
    if (doc.contains("timeout_ms")) d.remote.timeout = std::chrono::milliseconds(get_field<std::int64_t>(doc, "timeout_ms", where));
    read_optional(doc, "top_logprobs", d.remote.top_logprobs, where);
    read_optional(doc, "auth_env", d.remote.auth_env, where);
    if (doc.contains("tokenization")) d.remote.tokenization = parse_tokenization(get_field<std::string>(doc, "tokenization", where));
    read_optional(doc, "vocab", d.vocab, where);
    if (doc.contains("vocab_path")) d.vocab_path = resolve(base, get_field<std::string>(doc, "vocab_path", where));
    if (d.vocab.empty() && d.vocab_path.empty()) config_error(where + ": remote models need 'vocab' or 'vocab_path'");
    if (d.remote.top_logprobs < 1) config_error(where + ".top_logprobs must be at least 1");
    if (d.remote.timeout.count() <= 0) config_error(where + ".timeout_ms must be positive");
  } else {
    config_error(where + ".kind must be table, ngram or remote, got '" + kind + "'");
  }
  return d;
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc,
                 {"models", "weights", "strategy", "top_k", "seed", "max_new_tokens", "tokenization", "prompt", "stop",
                  "greedy", "out", "latency", "equivalence"},
                 "config");
  RunConfig cfg;
  const auto& models = doc.contains("models") ? doc.at("models") : json();
  if (!models.is_array() || models.empty()) config_error("config.models must be a non-empty array");
  for (std::size_t i = 0; i < models.size(); ++i) cfg.models.push_back(parse_model(models[i], base_dir, i));

  if (doc.contains("weights")) cfg.weights = get_field<std::vector<double>>(doc, "weights", "config");
  if (doc.contains("strategy")) cfg.strategy = Strategy::parse(get_field<std::string>(doc, "strategy", "config"));
  if (doc.contains("top_k")) {
    const auto& k = doc.at("top_k");
    cfg.alignment = k.is_string() ? AlignmentConfig::parse(k.get<std::string>())
                                  : AlignmentConfig::parse(std::to_string(get_field<std::int64_t>(doc, "top_k", "config")));
  }
  read_optional(doc, "seed", cfg.seed, "config");
  read_optional(doc, "max_new_tokens", cfg.max_new_tokens, "config");
  if (doc.contains("tokenization")) cfg.tokenization = parse_tokenization(get_field<std::string>(doc, "tokenization", "config"));
  read_optional(doc, "prompt", cfg.prompt, "config");
  read_optional(doc, "stop", cfg.stop, "config");
  read_optional(doc, "greedy", cfg.greedy, "config");
  if (doc.contains("out")) cfg.out = resolve(base_dir, get_field<std::string>(doc, "out", "config"));

  if (doc.contains("latency")) {
    const auto& lat = doc.at("latency");
    reject_unknown(lat, {"decode_ms", "prefill_chunk_ms", "max_chunk", "prefill_mode"}, "config.latency");
    read_optional(lat, "decode_ms", cfg.latency.decode_ms, "config.latency");
    read_optional(lat, "prefill_chunk_ms", cfg.latency.prefill_chunk_ms, "config.latency");
    read_optional(lat, "max_chunk", cfg.latency.max_chunk, "config.latency");
    if (lat.contains("prefill_mode")) cfg.latency.mode = parse_prefill_mode(get_field<std::string>(lat, "prefill_mode", "config.latency"));
  }
  if (doc.contains("equivalence")) {
    const auto& eq = doc.at("equivalence");
    reject_unknown(eq, {"samples", "tv_threshold", "p_floor", "prefixes", "prefixes_path", "lambda_step", "workers"},
                   "config.equivalence");
    auto& e = cfg.equivalence;
    read_optional(eq, "samples", e.samples, "config.equivalence");
    read_optional(eq, "tv_threshold", e.tv_threshold, "config.equivalence");
    read_optional(eq, "p_floor", e.p_floor, "config.equivalence");
    read_optional(eq, "prefixes", e.prefixes, "config.equivalence");
    if (eq.contains("prefixes_path")) e.prefixes_path = resolve(base_dir, get_field<std::string>(eq, "prefixes_path", "config.equivalence"));
    read_optional(eq, "lambda_step", e.lambda_step, "config.equivalence");
    read_optional(eq, "workers", e.workers, "config.equivalence");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  return from_json(read_json_file(file), file.parent_path());
}

void RunConfig::validate() const {
  if (models.empty()) config_error("at least one model is required");
  if (weights) {
    if (weights->size() != models.size()) {
      config_error(std::to_string(weights->size()) + " weights for " + std::to_string(models.size()) + " models");
    }
    EnsembleWeights check(*weights);
  }
  if (strategy.kind == StrategyKind::Single && strategy.single_index >= models.size()) {
    config_error("single model index " + std::to_string(strategy.single_index) + " out of range");
  }
  if (greedy && strategy.kind != StrategyKind::Ce) {
    throw Error(ErrorKind::GreedyUnsupported, "greedy decoding is only available with the ce strategy");
  }
  if (max_new_tokens < 1) config_error("max_new_tokens must be at least 1");
  if (!(latency.decode_ms >= 0.0) || !(latency.prefill_chunk_ms >= 0.0)) config_error("latency costs must be non-negative");
  if (latency.max_chunk < 1) config_error("latency.max_chunk must be at least 1");
  if (!(equivalence.tv_threshold > 0.0)) config_error("equivalence.tv_threshold must be positive");
  if (!(equivalence.p_floor >= 0.0 && equivalence.p_floor < 1.0)) config_error("equivalence.p_floor must lie in [0, 1)");
  if (!(equivalence.lambda_step > 0.0 && equivalence.lambda_step <= 1.0)) config_error("equivalence.lambda_step must lie in (0, 1]");
}

std::vector<double> parse_csv_doubles(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    try {
      std::size_t used = 0;
      const std::string s(piece);
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      config_error("'" + std::string(text) + "' is not a comma-separated list of numbers");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + file.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json_file(const std::filesystem::path& file) {
  try {
    return json::parse(read_text_file(file));
  } catch (const json::exception& e) {
    config_error("'" + file.string() + "' is not valid JSON: " + e.what());
  }
}

std::unique_ptr<TokenPredictor> load_model(const ModelDescriptor& d) {
  switch (d.kind) {
    case ModelKind::Table:
      return TableModel::from_json(d.inline_table ? *d.inline_table : read_json_file(d.path));
    case ModelKind::NGram:
      return NGramModel::from_json(read_json_file(d.path));
    case ModelKind::Remote: {
      auto tokens = d.vocab;
      if (tokens.empty()) {
        const auto doc = read_json_file(d.vocab_path);
        try {
          tokens = doc.is_array() ? doc.get<std::vector<std::string>>() : doc.at("vocab").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
          config_error("'" + d.vocab_path.string() + "' holds no vocabulary: " + e.what());
        }
      }
      return std::make_unique<RemotePredictor>(make_vocabulary(std::move(tokens)), d.remote);
    }
  }
  config_error("unknown model kind");
}

EnsembleSpec build_spec(const RunConfig& config) {
  std::vector<std::unique_ptr<TokenPredictor>> models;
  for (const auto& d : config.models) models.push_back(load_model(d));
  auto weights = config.weights ? EnsembleWeights(*config.weights) : EnsembleWeights::uniform(models.size());
  return EnsembleSpec(std::move(models), std::move(weights), config.alignment);
}

TokenSequence encode_text(const EnsembleSpec& spec, std::string_view text, Tokenization mode) {
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(text, mode)) {
    auto id = spec.vocab()->find(tok);
    if (!id) throw Error(ErrorKind::PromptNotRepresentable, "token '" + tok + "' is not in any model's vocabulary");
    ids.push_back(*id);
  }
  return TokenSequence(spec.vocab(), std::move(ids));
}

}  // namespace mixens
