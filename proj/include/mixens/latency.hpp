#pragma once

#include <cstddef>
#include <string_view>

#include "mixens/decoding.hpp"

namespace mixens {

// How a lazy-sync prefill is scheduled relative to the decode forward that
// follows it on the same model.
enum class PrefillMode {
  // The missing tokens and the decode input go through one forward pass. The
  // pass costs decode_ms for its first max_chunk tokens and prefill_chunk_ms
  // for every further chunk.
  Fused,
  // The prefill is its own pass: ceil(m / max_chunk) chunks at
  // prefill_chunk_ms each, followed by a decode_ms decode forward.
  Separate,
};

PrefillMode parse_prefill_mode(std::string_view text);
std::string_view to_string(PrefillMode mode);

// Memory-bandwidth-bound latency model for simulated decoding.
struct LatencyModel {
  double decode_ms = 10.0;
  double prefill_chunk_ms = 10.0;
  std::size_t max_chunk = 512;
  PrefillMode mode = PrefillMode::Fused;
};

// Simulated cost of one model's work within one step.
double forward_cost(const LatencyModel& model, const WorkReceipt& step_work);

struct LatencyReport {
  std::size_t tokens = 0;
  double total_ms = 0.0;
  double tokens_per_sec = 0.0;
  // The same number of tokens decoded by sequential CE over the same models
  // and prompt.
  double ce_sequential_ms = 0.0;
  double speedup_vs_ce = 0.0;
};

// Steps run sequentially; within a step the costs of every model that did
// work add up (sequential CE).
LatencyReport simulate_latency(const GenerationTrace& trace, const LatencyModel& model);

}  // namespace mixens
