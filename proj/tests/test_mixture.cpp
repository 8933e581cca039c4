#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "mixens/error.hpp"
#include "mixens/mixture.hpp"

using namespace mixens;
using fixtures::ab_vocab;

namespace {

Distribution random_simplex(const VocabularyPtr& vocab, SeededRng& rng, double zero_rate = 0.0) {
  std::vector<double> w(vocab->size());
  for (auto& x : w) x = rng.uniform() < zero_rate ? 0.0 : -std::log(1.0 - rng.uniform());
  w[rng.next_u64() % w.size()] += 0.1;
  return Distribution::from_weights(vocab, w);
}

}  // namespace

TEST_CASE("max_lambda examples") {
  const auto v = ab_vocab();
  const Distribution c(v, {0.4, 0.6});
  CHECK(max_lambda(c, c) == 1.0);
  CHECK(max_lambda(c, Distribution(v, {0.6, 0.4})) == doctest::Approx(2.0 / 3.0));
  CHECK(max_lambda(Distribution(v, {0.0, 1.0}), Distribution(v, {1.0, 0.0})) == 0.0);
}

TEST_CASE("decompose examples") {
  const auto v = ab_vocab();
  const Distribution c(v, {0.4, 0.6});
  const auto d = decompose(c, Distribution(v, {0.6, 0.4}), 0.5);
  // (0.4 - 0.3) / 0.5 and (0.6 - 0.2) / 0.5
  CHECK(std::abs(d.residual[0] - 0.2) < 1e-12);
  CHECK(std::abs(d.residual[1] - 0.8) < 1e-12);

  const auto tiny = decompose(c, Distribution(v, {0.6, 0.4}), 1e-9);
  CHECK(std::abs(tiny.residual[0] - 0.4) < 1e-6);
  CHECK(std::abs(tiny.residual[1] - 0.6) < 1e-6);

  try {
    decompose(c, Distribution(v, {0.9, 0.1}), 0.5);
    FAIL("expected a containment violation");
  } catch (const ContainmentViolation& e) {
    CHECK(e.kind() == ErrorKind::ContainmentViolated);
    CHECK(e.index() == 0);
    CHECK(e.combined() == 0.4);
    CHECK(e.scaled_base() == doctest::Approx(0.45));
  }

  for (double bad : {0.0, 1.0, -0.2, 1.5, std::nan("")}) {
    try {
      decompose(c, c, bad);
      FAIL("expected LambdaOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LambdaOutOfRange);
    }
  }
  CHECK_THROWS_AS(decompose(c, Distribution(make_vocabulary({"a", "c"}), {0.5, 0.5}), 0.5), Error);
}

TEST_CASE("round trip on random triples") {
  SeededRng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto v = Vocabulary::indexed(2 + rng.next_u64() % 63);
    const auto c = random_simplex(v, rng);
    const auto p = random_simplex(v, rng, 0.3);
    const double limit = max_lambda(c, p);
    if (limit <= 0.0) continue;
    const double lambda = std::min(limit * (1.0 - rng.uniform()), 1.0 - 1e-6);
    if (!(lambda > 0.0)) continue;
    const auto d = decompose(c, p, lambda);
    const auto rebuilt = d.reconstruct();
    for (std::size_t x = 0; x < rebuilt.size(); ++x) worst = std::max(worst, std::abs(rebuilt[x] - c[x]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("decompose succeeds exactly when lambda is within max_lambda") {
  SeededRng rng(4);
  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const auto v = Vocabulary::indexed(2 + rng.next_u64() % 10);
    const auto c = random_simplex(v, rng);
    const auto p = random_simplex(v, rng);
    const double lambda = 0.001 + 0.998 * rng.uniform();
    const double limit = max_lambda(c, p);
    if (std::abs(lambda - limit) < 1e-9) continue;
    bool ok = true;
    try {
      decompose(c, p, lambda);
    } catch (const ContainmentViolation&) {
      ok = false;
    }
    CHECK(ok == (lambda <= limit));
    (ok ? accepted : rejected)++;
  }
  CHECK(accepted > 100);
  CHECK(rejected > 100);
}

TEST_CASE("transformed bases decompose unchanged") {
  const auto v = Vocabulary::indexed(4);
  const Distribution p(v, {0.5, 0.3, 0.15, 0.05});
  const auto sq = squared_normalized(p);
  CHECK(sq[0] == doctest::Approx(0.25 / (0.25 + 0.09 + 0.0225 + 0.0025)));
  const Distribution other(v, {0.1, 0.2, 0.3, 0.4});
  std::vector<double> c(4);
  for (std::size_t x = 0; x < 4; ++x) c[x] = 0.3 * sq[x] + 0.7 * other[x];
  const auto d = decompose(Distribution(v, c), sq, 0.3);
  for (std::size_t x = 0; x < 4; ++x) CHECK(std::abs(d.residual[x] - other[x]) < 1e-12);
}

TEST_CASE("decomposed sampling follows the combined distribution") {
  const auto v = ab_vocab();
  const auto d = decompose(Distribution(v, {0.4, 0.6}), Distribution(v, {0.6, 0.4}), 0.5);
  SeededRng rng(100);
  std::vector<double> counts(2, 0.0);
  double cheap = 0.0;
  const int n = 100000;
  const auto cheap_sampler = distribution_sampler(d.base);
  const auto expensive_sampler = distribution_sampler(d.residual);
  for (int i = 0; i < n; ++i) {
    const auto draw = decomposed_sample(d, cheap_sampler, expensive_sampler, rng);
    counts[draw.token] += 1.0;
    cheap += draw.branch == Branch::Cheap;
  }
  CHECK(tv_distance(std::vector<double>{counts[0] / n, counts[1] / n}, d.original.probs()) < 0.01);
  CHECK(std::abs(cheap / n - 0.5) < 0.01);

  const auto nearly = decompose(Distribution(v, {0.4, 0.6}), Distribution(v, {0.4, 0.6}), 0.999999);
  int cheap_hits = 0;
  for (int i = 0; i < 1000; ++i) cheap_hits += decomposed_sample(nearly, cheap_sampler, expensive_sampler, rng).branch == Branch::Cheap;
  CHECK(cheap_hits >= 999);
}

TEST_CASE("two-model mixture sampling is a decomposition of the averaged ensemble") {
  SeededRng rng(12);
  for (double l1 : {0.1, 0.3, 0.5, 0.8}) {
    auto spec = fixtures::table_pair({l1, 1.0 - l1});
    KvLedger ledger(2);
    const auto ce = ce_step(spec, TokenSequence(spec.vocab()), ledger);
    const Distribution p(spec.vocab(), {0.6, 0.4});
    const Distribution q(spec.vocab(), {0.2, 0.8});
    const auto d = decompose(ce, p, l1);
    CHECK(std::abs(d.residual[0] - q[0]) < 1e-12);
    CHECK(std::abs(d.residual[1] - q[1]) < 1e-12);

    // ME draws and decomposed draws from the same generator state coincide.
    auto me_spec = spec.fork_session();
    const std::uint64_t seed = rng.next_u64();
    SeededRng me_rng(seed), dec_rng(seed);
    const auto cheap = distribution_sampler(p);
    const auto expensive = distribution_sampler(d.residual);
    for (int i = 0; i < 2000; ++i) {
      me_spec.reset();
      KvLedger fresh(2);
      const auto pick = me_step(me_spec, TokenSequence(me_spec.vocab()), fresh, me_rng);
      const auto draw = decomposed_sample(d, cheap, expensive, dec_rng);
      CHECK(pick.token == draw.token);
      CHECK((pick.model == 0) == (draw.branch == Branch::Cheap));
    }
  }
}
