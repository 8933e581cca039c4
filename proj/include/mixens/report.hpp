#pragma once

#include <ostream>

#include "json.hpp"
#include "mixens/decoding.hpp"
#include "mixens/equivalence.hpp"
#include "mixens/latency.hpp"
#include "mixens/mixture.hpp"

namespace mixens {

// {step, strategy, selected_model, token, token_text, decode_forwards,
//  prefill_tokens}; selected_model is "all" for the conventional ensemble.
nlohmann::json step_json(const GenerationTrace& trace, const StepRecord& step);

// One compact JSON object per line, in step order.
void write_trace_jsonl(std::ostream& out, const GenerationTrace& trace);

// {tokens, strategy, finish_reason, text, decode_forwards, prefill_tokens,
//  per_model: [{decode_forwards, prefill_tokens, selections}],
//  simulated: {decode_ms, prefill_chunk_ms, max_chunk, prefill_mode,
//              total_ms, tokens_per_sec, ce_sequential_ms, speedup_vs_ce}}
nlohmann::json summary_json(const GenerationTrace& trace, const std::string& text, const LatencyModel& model,
                            const LatencyReport& latency);

nlohmann::json equivalence_json(const EquivalenceReport& report);

nlohmann::json decomposition_json(const MixtureDecomposition& d, double max_lambda);

}  // namespace mixens
