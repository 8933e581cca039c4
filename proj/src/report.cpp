#include "mixens/report.hpp"

#include <algorithm>
#include <cmath>

namespace mixens {

using nlohmann::json;

json step_json(const GenerationTrace& trace, const StepRecord& step) {
  const WorkReceipt total = step.total();
  return {
      {"step", step.step},
      {"strategy", trace.strategy.name()},
      {"selected_model", step.selected_model ? json(*step.selected_model) : json("all")},
      {"token", step.token},
      {"token_text", step.token_text},
      {"decode_forwards", total.decode_forwards},
      {"prefill_tokens", total.prefill_tokens},
  };
}

void write_trace_jsonl(std::ostream& out, const GenerationTrace& trace) {
  for (const auto& step : trace.steps) out << step_json(trace, step).dump() << '\n';
}

json summary_json(const GenerationTrace& trace, const std::string& text, const LatencyModel& model,
                  const LatencyReport& latency) {
  json per_model = json::array();
  for (std::size_t i = 0; i < trace.model_count; ++i) {
    per_model.push_back({
        {"decode_forwards", trace.per_model[i].decode_forwards},
        {"prefill_tokens", trace.per_model[i].prefill_tokens},
        {"selections", trace.selections[i]},
    });
  }
  return {
      {"tokens", trace.steps.size()},
      {"strategy", trace.strategy.name()},
      {"finish_reason", std::string(to_string(trace.finish))},
      {"text", text},
      {"decode_forwards", trace.total().decode_forwards},
      {"prefill_tokens", trace.total().prefill_tokens},
      {"per_model", std::move(per_model)},
      {"simulated",
       {
           {"decode_ms", model.decode_ms},
           {"prefill_chunk_ms", model.prefill_chunk_ms},
           {"max_chunk", model.max_chunk},
           {"prefill_mode", std::string(to_string(model.mode))},
           {"total_ms", latency.total_ms},
           {"tokens_per_sec", latency.tokens_per_sec},
           {"ce_sequential_ms", latency.ce_sequential_ms},
           {"speedup_vs_ce", latency.speedup_vs_ce},
       }},
  };
}

namespace {

// JSON has no infinity; an unbounded statistic is written as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json equivalence_json(const EquivalenceReport& report) {
  json prefixes = json::array();
  double worst_tv = 0.0;
  for (const auto& p : report.prefixes) {
    worst_tv = std::max(worst_tv, p.tv);
    prefixes.push_back({
        {"prefix", p.prefix_text},
        {"tv", p.tv},
        {"chi_square", finite_or_null(p.chi_square.statistic)},
        {"dof", p.chi_square.dof},
        {"p_value", p.chi_square.p_value},
        {"analytic", p.analytic},
        {"empirical", empirical_distribution(p.counts)},
        {"pass", p.pass},
    });
  }
  return {
      {"weights", report.weights},
      {"sampling_weights", report.sampling_weights},
      {"samples", report.samples},
      {"tv_threshold", report.tv_threshold},
      {"p_floor", report.p_floor},
      {"max_tv", worst_tv},
      {"prefixes", std::move(prefixes)},
      {"verdict", report.pass ? "PASS" : "FAIL"},
  };
}

json decomposition_json(const MixtureDecomposition& d, double max_lambda) {
  double worst = 0.0;
  const auto rebuilt = d.reconstruct();
  for (std::size_t x = 0; x < rebuilt.size(); ++x) worst = std::max(worst, std::abs(rebuilt[x] - d.original[x]));
  return {
      {"lambda", d.lambda},
      {"max_lambda", max_lambda},
      {"combined", d.original.probs()},
      {"base", d.base.probs()},
      {"residual", d.residual.probs()},
      {"reconstruction_error", worst},
  };
}

}  // namespace mixens
