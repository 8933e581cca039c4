#pragma once

// Rewriting a combined distribution C that contains lambda * p pointwise as
// the mixture (1 - lambda) * C' + lambda * p, so that a fraction lambda of
// draws only needs the cheap base distribution p.

#include <functional>

#include "mixens/core.hpp"
#include "mixens/error.hpp"

namespace mixens {

// Per-entry absolute tolerance of the containment check C >= lambda * p.
inline constexpr double kContainmentTolerance = 1e-12;

struct MixtureDecomposition {
  double lambda;
  Distribution original;  // C
  Distribution base;      // p
  Distribution residual;  // C' = (C - lambda * p) / (1 - lambda)

  // (1 - lambda) * C' + lambda * p, entrywise.
  std::vector<double> reconstruct() const;
};

// Raised by decompose with the first entry where C(x) < lambda * p(x).
class ContainmentViolation : public Error {
 public:
  ContainmentViolation(std::size_t index, double combined, double scaled_base);

  std::size_t index() const noexcept { return index_; }
  double combined() const noexcept { return combined_; }
  double scaled_base() const noexcept { return scaled_base_; }

 private:
  std::size_t index_;
  double combined_;
  double scaled_base_;
};

// Largest lambda with C >= lambda * p: min over supp(p) of C(x) / p(x),
// clamped to [0, 1]. Throws VocabMismatch.
double max_lambda(const Distribution& combined, const Distribution& base);

// Throws LambdaOutOfRange unless 0 < lambda < 1, VocabMismatch, or
// ContainmentViolation. Residual entries that come out negative within
// tolerance are clamped to zero before C' is renormalized.
MixtureDecomposition decompose(const Distribution& combined, const Distribution& base, double lambda);

// norm(p^2); one of the transformed bases a combination may contain.
Distribution squared_normalized(const Distribution& base);

using TokenSampler = std::function<TokenId(SeededRng&)>;

TokenSampler distribution_sampler(Distribution dist);

enum class Branch { Cheap, Expensive };

struct DecomposedDraw {
  TokenId token;
  Branch branch;
};

// With probability lambda draws from `cheap` (distributed as p), otherwise
// from `expensive` (distributed as C'). One uniform picks the branch.
DecomposedDraw decomposed_sample(const MixtureDecomposition& d, const TokenSampler& cheap,
                                 const TokenSampler& expensive, SeededRng& rng);

}  // namespace mixens
