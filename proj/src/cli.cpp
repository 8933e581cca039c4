#include "mixens/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "mixens/config.hpp"
#include "mixens/ngram_model.hpp"
#include "mixens/report.hpp"

namespace mixens {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string strategy;
  std::string top_k;
  std::string lambda;
  std::string out;
  std::size_t samples = 0;
  std::size_t max_new_tokens = 0;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* strategy_opt = nullptr;
  CLI::Option* top_k_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* max_new_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "Run configuration (JSON)")->required();
    seed_opt = cmd->add_option("--seed", seed, "Override the random seed");
    strategy_opt = cmd->add_option("--strategy", strategy, "single[:i] | ce | me");
    top_k_opt = cmd->add_option("--top-k", top_k, "Alignment truncation: n | all");
    lambda_opt = cmd->add_option("--lambda", lambda, "Ensemble weights, comma separated");
    out_opt = cmd->add_option("--out", out, "Output directory");
    samples_opt = cmd->add_option("--samples", samples, "Equivalence sample count");
    max_new_opt = cmd->add_option("--max-new-tokens", max_new_tokens, "Tokens to generate");
  }

  // Loads the config and applies command-line overrides. Every failure here
  // is a configuration error.
  RunConfig load() const {
    try {
      RunConfig cfg = RunConfig::load(config);
      if (seed_opt->count()) cfg.seed = seed;
      if (strategy_opt->count()) cfg.strategy = Strategy::parse(strategy);
      if (top_k_opt->count()) cfg.alignment = AlignmentConfig::parse(top_k);
      if (lambda_opt->count()) cfg.weights = parse_csv_doubles(lambda);
      if (out_opt->count()) cfg.out = out;
      if (samples_opt->count()) cfg.equivalence.samples = samples;
      if (max_new_opt->count()) cfg.max_new_tokens = max_new_tokens;
      cfg.validate();
      return cfg;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::InvalidConfig, e.what());
      throw;
    }
  }
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

void write_metadata(const fs::path& dir, const std::string& command, const RunFlags& flags) {
  write_file(dir / "metadata.json",
             json{{"command", command}, {"config", flags.config}, {"generated_at", utc_timestamp()}}.dump(2) + "\n");
}

// Builds the spec and encodes the prompt; failures are configuration errors.
struct Session {
  EnsembleSpec spec;
  TokenSequence prompt;
  GenerationConfig gen;
};

Session open_session(const RunConfig& cfg) {
  EnsembleSpec spec = [&] {
    try {
      return build_spec(cfg);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::InvalidConfig, e.what());
      throw;
    }
  }();
  TokenSequence prompt = encode_text(spec, cfg.prompt, cfg.tokenization);
  GenerationConfig gen;
  gen.max_new_tokens = cfg.max_new_tokens;
  gen.seed = cfg.seed;
  gen.strategy = cfg.strategy;
  gen.greedy = cfg.greedy;
  for (const auto& s : cfg.stop) {
    auto id = spec.vocab()->find(s);
    if (!id) throw Error(ErrorKind::InvalidConfig, "stop token '" + s + "' is not in any model's vocabulary");
    gen.stop_tokens.insert(*id);
  }
  return {std::move(spec), std::move(prompt), std::move(gen)};
}

std::string emitted_text(const EnsembleSpec& spec, const GenerationTrace& trace, Tokenization mode) {
  return detokenize(*spec.vocab(), trace.emitted, mode);
}

int cmd_train(const std::string& corpus_path, std::size_t order, double alpha, const std::string& tokenization,
              const std::string& out_path, std::ostream& out) {
  const Tokenization mode = parse_tokenization(tokenization);
  const auto text = read_text_file(corpus_path);
  const auto tokens = tokenize(text, mode);
  if (tokens.empty()) throw Error(ErrorKind::EmptyCorpus, "'" + corpus_path + "' contains no tokens");
  auto vocab = make_vocabulary(distinct_tokens(tokens));
  const auto ids = encode(*vocab, tokens);
  const auto model = NGramModel::train(ids, order, alpha, vocab, mode);
  const std::string serialized = model->to_json().dump(2) + "\n";
  if (out_path == "-") {
    out << serialized;
  } else {
    write_file(out_path, serialized);
  }
  return 0;
}

int cmd_generate(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.load();
  Session s = open_session(cfg);
  GenerationResult result = generate(s.spec, s.prompt, s.gen);
  const LatencyReport latency = simulate_latency(result.trace, cfg.latency);

  std::ostringstream trace;
  write_trace_jsonl(trace, result.trace);
  write_file(cfg.out / "trace.jsonl", trace.str());
  const json summary =
      summary_json(result.trace, emitted_text(s.spec, result.trace, cfg.tokenization), cfg.latency, latency);
  write_file(cfg.out / "summary.json", summary.dump(2) + "\n");
  write_metadata(cfg.out, "generate", flags);
  out << summary.dump(2) << "\n";
  if (result.error) {
    err << "generation stopped after " << result.trace.steps.size() << " tokens: " << result.error->what() << "\n";
    return 1;
  }
  return 0;
}

std::vector<std::string> load_prefix_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_text_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_equivalence(const RunFlags& flags, const std::string& prefixes_path, const std::string& sample_lambda,
                    bool sweep, double tv_threshold, double p_floor, std::ostream& out) {
  RunConfig cfg = flags.load();
  if (tv_threshold > 0.0) cfg.equivalence.tv_threshold = tv_threshold;
  if (p_floor >= 0.0) cfg.equivalence.p_floor = p_floor;
  cfg.validate();
  if (cfg.equivalence.samples < 10000) {
    throw Error(ErrorKind::InvalidConfig, "equivalence needs at least 10000 samples per prefix");
  }

  std::vector<std::string> texts;
  try {
    if (!prefixes_path.empty()) {
      texts = load_prefix_lines(prefixes_path);
    } else if (!cfg.equivalence.prefixes_path.empty()) {
      texts = load_prefix_lines(cfg.equivalence.prefixes_path);
    } else if (!cfg.equivalence.prefixes.empty()) {
      texts = cfg.equivalence.prefixes;
    } else {
      texts = {cfg.prompt};
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }

  Session s = open_session(cfg);
  std::vector<TokenSequence> prefixes;
  for (const auto& t : texts) prefixes.push_back(encode_text(s.spec, t, cfg.tokenization));

  EquivalenceOptions opts;
  opts.samples = cfg.equivalence.samples;
  opts.tv_threshold = cfg.equivalence.tv_threshold;
  opts.p_floor = cfg.equivalence.p_floor;
  opts.seed = cfg.seed;
  opts.workers = cfg.equivalence.workers;
  if (!sample_lambda.empty()) opts.sampling_weights = EnsembleWeights(parse_csv_doubles(sample_lambda));

  auto label = [&](json report, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) report["prefixes"][i]["prefix"] = names[i];
    return report;
  };

  json doc;
  bool pass = true;
  if (sweep) {
    const auto grid = lambda_grid(cfg.equivalence.lambda_step);
    json reports = json::array();
    for (const auto& r : run_lambda_sweep(s.spec, prefixes, grid, opts)) {
      pass = pass && r.pass;
      json entry = label(equivalence_json(r), texts);
      entry["lambda"] = r.weights.front();
      reports.push_back(std::move(entry));
    }
    doc = {{"sweep", std::move(reports)}, {"verdict", pass ? "PASS" : "FAIL"}};
  } else {
    const EquivalenceReport r = run_equivalence(s.spec, prefixes, opts);
    pass = r.pass;
    doc = label(equivalence_json(r), texts);
  }
  write_file(cfg.out / "equivalence.json", doc.dump(2) + "\n");
  write_metadata(cfg.out, "equivalence", flags);
  out << doc.dump(2) << "\n";
  return pass ? 0 : 3;
}

std::vector<double> read_vector_argument(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  json doc;
  try {
    doc = (first != std::string::npos && arg[first] == '[') ? json::parse(arg) : read_json_file(arg);
    return doc.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, "'" + arg + "' is not a JSON vector of numbers: " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
}

int cmd_decompose(const std::string& c_arg, const std::string& p_arg, double lambda, std::ostream& out) {
  const auto c_values = read_vector_argument(c_arg);
  const auto p_values = read_vector_argument(p_arg);
  if (c_values.size() != p_values.size()) {
    throw Error(ErrorKind::VocabMismatch, "C and p have different lengths");
  }
  if (c_values.empty()) throw Error(ErrorKind::InvalidDistribution, "C and p are empty");
  const auto vocab = Vocabulary::indexed(c_values.size());
  const Distribution combined(vocab, c_values);
  const Distribution base(vocab, p_values);
  const double limit = max_lambda(combined, base);
  try {
    out << decomposition_json(decompose(combined, base, lambda), limit).dump(2) << "\n";
  } catch (const ContainmentViolation& v) {
    out << json{{"error", "ContainmentViolated"},
                {"index", v.index()},
                {"combined", v.combined()},
                {"scaled_base", v.scaled_base()},
                {"lambda", lambda},
                {"max_lambda", limit}}
               .dump(2)
        << "\n";
    throw;
  }
  return 0;
}

int cmd_bench(const RunFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.load();
  Session s = open_session(cfg);
  std::vector<Strategy> strategies;
  for (std::size_t i = 0; i < s.spec.size(); ++i) strategies.push_back(Strategy::single(i));
  strategies.push_back(Strategy::ce());
  strategies.push_back(Strategy::me());

  json rows = json::array();
  double ce_tokens_per_sec = 0.0;
  std::vector<std::pair<Strategy, LatencyReport>> results;
  for (const auto& strategy : strategies) {
    GenerationConfig gen = s.gen;
    gen.strategy = strategy;
    gen.greedy = false;
    GenerationResult result = generate(s.spec, s.prompt, gen);
    if (result.error) throw *result.error;
    const auto latency = simulate_latency(result.trace, cfg.latency);
    if (strategy.kind == StrategyKind::Ce) ce_tokens_per_sec = latency.tokens_per_sec;
    const auto total = result.trace.total();
    std::string name = strategy.name();
    if (strategy.kind == StrategyKind::Single) name += ":" + std::to_string(strategy.single_index);
    rows.push_back({
        {"strategy", name},
        {"tokens", latency.tokens},
        {"decode_forwards", total.decode_forwards},
        {"prefill_tokens", total.prefill_tokens},
        {"simulated_ms", latency.total_ms},
        {"tokens_per_sec", latency.tokens_per_sec},
    });
  }
  for (auto& row : rows) {
    row["speedup_vs_ce"] = ce_tokens_per_sec > 0.0 ? row["tokens_per_sec"].get<double>() / ce_tokens_per_sec : 0.0;
  }
  const json doc{{"weights", s.spec.weights().values()},
                 {"latency",
                  {{"decode_ms", cfg.latency.decode_ms},
                   {"prefill_chunk_ms", cfg.latency.prefill_chunk_ms},
                   {"max_chunk", cfg.latency.max_chunk},
                   {"prefill_mode", std::string(to_string(cfg.latency.mode))}}},
                 {"rows", std::move(rows)}};
  write_file(cfg.out / "bench.json", doc.dump(2) + "\n");
  write_metadata(cfg.out, "bench", flags);
  out << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble decoding with mixture-like model selection", "mixens"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train a character or word n-gram model from a text corpus");
  std::string corpus, tokenization = "char", train_out = "-";
  std::size_t order = 2;
  double alpha = 0.0;
  train->add_option("--corpus", corpus, "UTF-8 text file")->required();
  train->add_option("--order", order, "n-gram order")->capture_default_str();
  train->add_option("--alpha", alpha, "additive smoothing")->capture_default_str();
  train->add_option("--tokenization", tokenization, "char | word")->capture_default_str();
  train->add_option("--out", train_out, "Model file, '-' for stdout")->capture_default_str();

  RunFlags gen_flags, eq_flags, bench_flags;
  auto* gen = app.add_subcommand("generate", "Generate tokens and write a JSONL trace plus a JSON summary");
  gen_flags.attach(gen);

  auto* eq = app.add_subcommand("equivalence", "Compare mixture-like sampling with the averaged ensemble");
  eq_flags.attach(eq);
  std::string prefixes_path, sample_lambda;
  bool sweep = false;
  double tv_threshold = -1.0, p_floor = -1.0;
  eq->add_option("--prefixes", prefixes_path, "File with one prefix per line");
  eq->add_option("--sample-lambda", sample_lambda, "Weights used for sampling (defaults to --lambda)");
  eq->add_flag("--sweep", sweep, "Sweep lambda over [0, 1] for a two-model ensemble");
  eq->add_option("--tv-threshold", tv_threshold, "Maximum total variation distance");
  eq->add_option("--p-floor", p_floor, "Minimum chi-square p-value");

  auto* dec = app.add_subcommand("decompose", "Split C into (1 - lambda) C' + lambda p");
  std::string c_arg, p_arg;
  double lambda = 0.0;
  dec->add_option("--c", c_arg, "Combined distribution: JSON vector or file")->required();
  dec->add_option("--p", p_arg, "Base distribution: JSON vector or file")->required();
  dec->add_option("--lambda", lambda, "Mixture weight of p")->required();

  auto* bench = app.add_subcommand("bench", "Simulated throughput of single models, CE and ME");
  bench_flags.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(corpus, order, alpha, tokenization, train_out, out);
    if (*gen) return cmd_generate(gen_flags, out, err);
    if (*eq) return cmd_equivalence(eq_flags, prefixes_path, sample_lambda, sweep, tv_threshold, p_floor, out);
    if (*dec) return cmd_decompose(c_arg, p_arg, lambda, out);
    if (*bench) return cmd_bench(bench_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mixens
