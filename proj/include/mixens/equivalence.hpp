#pragma once

// Statistical check that mixture-like sampling reproduces the averaged
// ensemble distribution.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixens/decoding.hpp"

namespace mixens {

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

// Pearson goodness-of-fit of `observed` counts against `expected` probabilities.
// Outcomes with expected count below `min_expected` are pooled into one bin;
// a pooled bin still below the threshold is merged into the smallest kept
// bin. Observations on an outcome of zero expected mass give an infinite
// statistic and p-value 0.
ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> expected,
                                double min_expected = 5.0);

std::vector<double> empirical_distribution(std::span<const std::uint64_t> counts);

struct EquivalenceOptions {
  std::size_t samples = 200000;
  double tv_threshold = 0.01;
  double p_floor = 0.001;
  std::uint64_t seed = 0;
  // 0 picks std::thread::hardware_concurrency().
  std::size_t workers = 0;
  // Draws per seeded block. Results depend on the block size but not on the
  // worker count or scheduling.
  std::size_t block = 4096;
  // Weights used for the mixture-like draws; defaults to the spec's own. A
  // different vector deliberately breaks the equivalence.
  std::optional<EnsembleWeights> sampling_weights;
};

struct PrefixResult {
  std::vector<TokenId> prefix;
  std::string prefix_text;
  std::vector<double> analytic;
  std::vector<std::uint64_t> counts;
  double tv = 0.0;
  ChiSquareResult chi_square;
  bool pass = false;
};

struct EquivalenceReport {
  std::vector<double> weights;
  std::vector<double> sampling_weights;
  std::size_t samples = 0;
  double tv_threshold = 0.0;
  double p_floor = 0.0;
  std::vector<PrefixResult> prefixes;
  bool pass = false;
};

// For each prefix: the analytic distribution from ce_step on a fresh session,
// against the first tokens of `samples` independent mixture-like sessions
// started from that prefix. A prefix passes when TV < tv_threshold and the
// chi-square p-value exceeds p_floor; the report passes when all do.
EquivalenceReport run_equivalence(const EnsembleSpec& spec, const std::vector<TokenSequence>& prefixes,
                                  const EquivalenceOptions& options);

// Two-model sweep: one report per lambda with weights [lambda, 1 - lambda].
std::vector<EquivalenceReport> run_lambda_sweep(const EnsembleSpec& spec, const std::vector<TokenSequence>& prefixes,
                                                std::span<const double> grid, const EquivalenceOptions& options);

// Evenly spaced lambdas from 0 to 1 inclusive; step is rounded so that it
// divides 1 (0.1 gives 0, 0.1, ..., 1).
std::vector<double> lambda_grid(double step = 0.1);

}  // namespace mixens
