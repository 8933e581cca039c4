#include "mixens/mixture.hpp"

#include <algorithm>
#include <sstream>

namespace mixens {

namespace {

std::string violation_message(std::size_t index, double combined, double scaled_base) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "entry " << index << ": C(x) = " << combined << " < lambda * p(x) = " << scaled_base;
  return msg.str();
}

void require_same_vocab(const Distribution& a, const Distribution& b) {
  if (!same_vocabulary(a.vocab(), b.vocab())) {
    throw Error(ErrorKind::VocabMismatch, "combined and base distributions use different vocabularies");
  }
}

}  // namespace

ContainmentViolation::ContainmentViolation(std::size_t index, double combined, double scaled_base)
    : Error(ErrorKind::ContainmentViolated, violation_message(index, combined, scaled_base)),
      index_(index),
      combined_(combined),
      scaled_base_(scaled_base) {}

std::vector<double> MixtureDecomposition::reconstruct() const {
  std::vector<double> out(original.size());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = (1.0 - lambda) * residual[x] + lambda * base[x];
  return out;
}

double max_lambda(const Distribution& combined, const Distribution& base) {
  require_same_vocab(combined, base);
  double best = 1.0;
  for (std::size_t x = 0; x < base.size(); ++x) {
    if (base[x] > 0.0) best = std::min(best, combined[x] / base[x]);
  }
  return std::clamp(best, 0.0, 1.0);
}

MixtureDecomposition decompose(const Distribution& combined, const Distribution& base, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    std::ostringstream msg;
    msg << "lambda must lie in (0, 1), got " << lambda;
    throw Error(ErrorKind::LambdaOutOfRange, msg.str());
  }
  require_same_vocab(combined, base);
  std::vector<double> residual(combined.size());
  for (std::size_t x = 0; x < combined.size(); ++x) {
    const double scaled = lambda * base[x];
    if (combined[x] < scaled - kContainmentTolerance) throw ContainmentViolation(x, combined[x], scaled);
    residual[x] = std::max(0.0, (combined[x] - scaled) / (1.0 - lambda));
  }
  return {lambda, combined, base, Distribution::from_weights(combined.vocab(), residual)};
}

Distribution squared_normalized(const Distribution& base) {
  std::vector<double> sq(base.size());
  for (std::size_t x = 0; x < sq.size(); ++x) sq[x] = base[x] * base[x];
  return Distribution::from_weights(base.vocab(), sq);
}

TokenSampler distribution_sampler(Distribution dist) {
  return [dist = std::move(dist)](SeededRng& rng) { return sample_token(dist, rng); };
}

DecomposedDraw decomposed_sample(const MixtureDecomposition& d, const TokenSampler& cheap,
                                 const TokenSampler& expensive, SeededRng& rng) {
  if (rng.uniform() < d.lambda) return {cheap(rng), Branch::Cheap};
  return {expensive(rng), Branch::Expensive};
}

}  // namespace mixens
