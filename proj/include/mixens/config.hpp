#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixens/alignment.hpp"
#include "mixens/decoding.hpp"
#include "mixens/latency.hpp"
#include "mixens/remote_predictor.hpp"
#include "mixens/tokenize.hpp"

namespace mixens {

enum class ModelKind { Table, NGram, Remote };

struct ModelDescriptor {
  ModelKind kind = ModelKind::Table;
  // Model file for table / ngram models.
  std::filesystem::path path;
  // Inline table model document, used instead of `path` when present.
  std::optional<nlohmann::json> inline_table;
  // Remote models only.
  RemoteConfig remote;
  std::vector<std::string> vocab;
  std::filesystem::path vocab_path;
};

struct EquivalenceSettings {
  std::size_t samples = 200000;
  double tv_threshold = 0.01;
  double p_floor = 0.001;
  std::vector<std::string> prefixes;
  std::filesystem::path prefixes_path;
  double lambda_step = 0.1;
  std::size_t workers = 0;
};

// One JSON document describing a run. Unknown keys are rejected at every
// level and every field is checked before any model is loaded. Relative paths
// resolve against the config file's directory. Secrets are never stored; a
// remote model names the environment variable that holds its token.
struct RunConfig {
  std::vector<ModelDescriptor> models;
  std::optional<std::vector<double>> weights;  // uniform when absent
  Strategy strategy = Strategy::me();
  AlignmentConfig alignment;
  std::uint64_t seed = 0;
  std::size_t max_new_tokens = 32;
  Tokenization tokenization = Tokenization::Char;
  std::string prompt;
  std::vector<std::string> stop;
  bool greedy = false;
  std::filesystem::path out = "out";
  LatencyModel latency;
  EquivalenceSettings equivalence;

  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& file);

  // Cross-field checks (weights vs model count, strategy index, ...).
  // Throws InvalidConfig.
  void validate() const;
};

// "0.5,0.5" -> {0.5, 0.5}; throws InvalidConfig.
std::vector<double> parse_csv_doubles(std::string_view text);

nlohmann::json read_json_file(const std::filesystem::path& file);
std::string read_text_file(const std::filesystem::path& file);

std::unique_ptr<TokenPredictor> load_model(const ModelDescriptor& descriptor);
EnsembleSpec build_spec(const RunConfig& config);

// Tokenizes `text` onto the ensemble's unified vocabulary. Unknown tokens
// throw PromptNotRepresentable.
TokenSequence encode_text(const EnsembleSpec& spec, std::string_view text, Tokenization mode);

}  // namespace mixens
