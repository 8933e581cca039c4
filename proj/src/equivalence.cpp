#include "mixens/equivalence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>

namespace mixens {

ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> expected,
                                double min_expected) {
  if (observed.size() != expected.size()) throw Error(ErrorKind::VocabMismatch, "observed and expected differ in length");
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));

  struct Bin {
    double observed = 0.0;
    double expected = 0.0;
  };
  std::vector<Bin> bins;
  Bin pooled;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const Bin b{static_cast<double>(observed[i]), n * expected[i]};
    if (b.expected >= min_expected) {
      bins.push_back(b);
    } else {
      pooled.observed += b.observed;
      pooled.expected += b.expected;
    }
  }
  ChiSquareResult result;
  if (pooled.expected <= 0.0) {
    if (pooled.observed > 0.0) {
      result.statistic = std::numeric_limits<double>::infinity();
      result.dof = bins.empty() ? 0 : bins.size() - 1;
      result.p_value = 0.0;
      return result;
    }
  } else if (pooled.expected >= min_expected || bins.empty()) {
    bins.push_back(pooled);
  } else {
    auto smallest = std::min_element(bins.begin(), bins.end(),
                                     [](const Bin& a, const Bin& b) { return a.expected < b.expected; });
    smallest->observed += pooled.observed;
    smallest->expected += pooled.expected;
  }
  for (const auto& b : bins) {
    const double d = b.observed - b.expected;
    result.statistic += d * d / b.expected;
  }
  result.dof = bins.empty() ? 0 : bins.size() - 1;
  result.p_value = result.dof == 0 ? 1.0
                                   : boost::math::gamma_q(static_cast<double>(result.dof) / 2.0, result.statistic / 2.0);
  return result;
}

std::vector<double> empirical_distribution(std::span<const std::uint64_t> counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  std::vector<double> out(counts.size(), 0.0);
  if (n == 0.0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / n;
  return out;
}

namespace {

std::vector<std::uint64_t> sample_first_tokens(const EnsembleSpec& spec, const EnsembleWeights& weights,
                                               const TokenSequence& prefix, std::size_t samples, std::uint64_t seed,
                                               std::size_t workers, std::size_t block) {
  const std::size_t vocab_size = spec.vocab()->size();
  const std::size_t blocks = (samples + block - 1) / block;
  std::vector<std::uint64_t> totals(vocab_size, 0);
  std::mutex merge;
  std::atomic<std::size_t> next_block{0};
  std::exception_ptr failure;

  auto work = [&] {
    try {
      EnsembleSpec session = spec.fork_session(weights);
      std::vector<std::uint64_t> local(vocab_size, 0);
      for (std::size_t b = next_block++; b < blocks; b = next_block++) {
        SeededRng rng(derive_seed(seed, b));
        const std::size_t begin = b * block;
        const std::size_t end = std::min(samples, begin + block);
        for (std::size_t s = begin; s < end; ++s) {
          session.reset();
          KvLedger ledger(session.size());
          ++local[me_step(session, prefix, ledger, rng).token];
        }
      }
      std::lock_guard lock(merge);
      for (std::size_t i = 0; i < vocab_size; ++i) totals[i] += local[i];
    } catch (...) {
      std::lock_guard lock(merge);
      if (!failure) failure = std::current_exception();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, blocks));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return totals;
}

}  // namespace

EquivalenceReport run_equivalence(const EnsembleSpec& spec, const std::vector<TokenSequence>& prefixes,
                                  const EquivalenceOptions& options) {
  if (options.samples == 0) throw Error(ErrorKind::InvalidConfig, "sample count must be positive");
  if (options.block == 0) throw Error(ErrorKind::InvalidConfig, "block size must be positive");
  const EnsembleWeights sampling = options.sampling_weights.value_or(spec.weights());
  if (sampling.size() != spec.size()) throw Error(ErrorKind::InvalidConfig, "sampling weights do not match model count");
  std::size_t workers = options.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

  EquivalenceReport report;
  report.weights = spec.weights().values();
  report.sampling_weights = sampling.values();
  report.samples = options.samples;
  report.tv_threshold = options.tv_threshold;
  report.p_floor = options.p_floor;
  report.pass = true;

  EnsembleSpec analytic_session = spec.fork_session();
  for (std::size_t k = 0; k < prefixes.size(); ++k) {
    const TokenSequence& prefix = prefixes[k];
    analytic_session.reset();
    KvLedger ledger(analytic_session.size());
    const Distribution analytic = ce_step(analytic_session, prefix, ledger);

    PrefixResult r;
    r.prefix.assign(prefix.view().begin(), prefix.view().end());
    for (TokenId t : prefix.view()) r.prefix_text += spec.vocab()->token(t);
    r.analytic = analytic.probs();
    r.counts = sample_first_tokens(spec, sampling, prefix, options.samples, derive_seed(options.seed, k), workers,
                                   options.block);
    r.tv = tv_distance(empirical_distribution(r.counts), r.analytic);
    r.chi_square = chi_square_test(r.counts, r.analytic);
    r.pass = r.tv < options.tv_threshold && r.chi_square.p_value > options.p_floor;
    report.pass = report.pass && r.pass;
    report.prefixes.push_back(std::move(r));
  }
  return report;
}

std::vector<EquivalenceReport> run_lambda_sweep(const EnsembleSpec& spec, const std::vector<TokenSequence>& prefixes,
                                                std::span<const double> grid, const EquivalenceOptions& options) {
  if (spec.size() != 2) throw Error(ErrorKind::InvalidConfig, "a lambda sweep needs exactly two models");
  std::vector<EquivalenceReport> reports;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double lambda = grid[g];
    const EnsembleSpec weighted = spec.fork_session(EnsembleWeights({lambda, 1.0 - lambda}));
    EquivalenceOptions opts = options;
    opts.seed = derive_seed(options.seed, 1000 + g);
    opts.sampling_weights.reset();
    reports.push_back(run_equivalence(weighted, prefixes, opts));
  }
  return reports;
}

std::vector<double> lambda_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw Error(ErrorKind::InvalidConfig, "lambda grid step must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= count; ++i) grid.push_back(std::min(1.0, static_cast<double>(i) / static_cast<double>(count)));
  return grid;
}

}  // namespace mixens
