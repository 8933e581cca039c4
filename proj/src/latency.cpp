#include "mixens/latency.hpp"

#include <string>

namespace mixens {

PrefillMode parse_prefill_mode(std::string_view text) {
  if (text == "fused") return PrefillMode::Fused;
  if (text == "separate") return PrefillMode::Separate;
  throw Error(ErrorKind::InvalidConfig, "prefill mode must be 'fused' or 'separate', got '" + std::string(text) + "'");
}

std::string_view to_string(PrefillMode mode) { return mode == PrefillMode::Fused ? "fused" : "separate"; }

namespace {

std::uint64_t chunks(std::uint64_t tokens, std::size_t max_chunk) { return (tokens + max_chunk - 1) / max_chunk; }

}  // namespace

double forward_cost(const LatencyModel& model, const WorkReceipt& step_work) {
  if (model.max_chunk == 0) throw Error(ErrorKind::InvalidConfig, "max_chunk must be positive");
  const auto decodes = step_work.decode_forwards;
  const auto prefill = step_work.prefill_tokens;
  if (model.mode == PrefillMode::Separate || decodes == 0) {
    return static_cast<double>(decodes) * model.decode_ms +
           static_cast<double>(chunks(prefill, model.max_chunk)) * model.prefill_chunk_ms;
  }
  // The prefill rides in the first decode forward's pass, next to its input.
  const auto extra_chunks = chunks(prefill + 1, model.max_chunk) - 1;
  return static_cast<double>(decodes) * model.decode_ms + static_cast<double>(extra_chunks) * model.prefill_chunk_ms;
}

LatencyReport simulate_latency(const GenerationTrace& trace, const LatencyModel& model) {
  LatencyReport report;
  report.tokens = trace.steps.size();
  for (const auto& step : trace.steps) {
    for (const auto& work : step.per_model) report.total_ms += forward_cost(model, work);
  }
  if (report.tokens > 0) {
    const double n = static_cast<double>(trace.model_count);
    const double first = forward_cost(model, {1, trace.prompt.size()});
    const double rest = forward_cost(model, {1, 0});
    report.ce_sequential_ms = n * (first + static_cast<double>(report.tokens - 1) * rest);
  }
  if (report.total_ms > 0.0) {
    report.tokens_per_sec = static_cast<double>(report.tokens) * 1000.0 / report.total_ms;
    report.speedup_vs_ce = report.ce_sequential_ms / report.total_ms;
  }
  return report;
}

}  // namespace mixens
