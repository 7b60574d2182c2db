#pragma once

#include <cstddef>
#include <set>
#include <span>

#include "swift/draft.hpp"
#include "swift/error.hpp"

namespace swift {

struct VerifyOutcome {
  std::vector<token_t> accepted_tokens;  // committed emissions incl. the closing token
  size_t accepted_draft_count = 0;
  size_t draft_spine_len = 0;
};

struct VerifyLimits {
  size_t max_emit = static_cast<size_t>(-1);
  const std::set<token_t>* stop = nullptr;
};

// One full-model forward over the linearized tree, then a depth walk: the
// target argmax either continues the spine, lands on a sibling (accepted,
// walk ends - deeper draft context assumed the spine token), or falls
// outside the candidates (emitted as the correction). Exactly one token
// beyond the accepted drafts is always emitted. The cache ends committed
// through the emitted tokens minus the trailing one; all other draft rows
// are discarded.
VerifyOutcome verify_greedy(const ModelBundle& m, KVCache& cache, const DraftTree& tree,
                            token_t pending, const VerifyLimits& limits = {});

// Chain speculative sampling over the spine only (siblings are a greedy-mode
// device). Both distributions are temperature-scaled and top-p filtered
// identically, preserving the target sampling law. Draw order per call: one
// uniform per examined spine step, plus one residual draw on rejection or
// one bonus draw on full acceptance.
VerifyOutcome verify_sampling(const ModelBundle& m, KVCache& cache, const DraftTree& tree,
                              token_t pending, double temperature, double top_p, Rng& rng,
                              const VerifyLimits& limits = {});

struct AcceptResult {
  bool accepted = false;
  token_t token = 0;
  bool residual_used = false;
};

// Speculative-sampling acceptance for one position: accept the draft token
// iff u < min(1, target/draft); otherwise sample from the normalized
// residual max(0, target - draft) with one more draw from rng.
AcceptResult spec_sample_accept(std::span<const double> target_dist,
                                std::span<const double> draft_dist, token_t draft_token, double u,
                                Rng& rng);

// Shared with the exact-arithmetic test oracles.
template <class Real>
std::vector<Real> residual_distribution(std::span<const Real> target, std::span<const Real> draft) {
  std::vector<Real> res(target.size());
  Real total(0);
  for (size_t i = 0; i < target.size(); ++i) {
    Real diff = target[i] - draft[i];
    res[i] = diff > Real(0) ? diff : Real(0);
    total += res[i];
  }
  if (!(total > Real(0)))
    throw DegenerateResidual("residual mass is zero: rejection was impossible");
  for (Real& r : res) r /= total;
  return res;
}

// Nucleus filter: keeps the smallest probability-descending prefix whose mass
// reaches top_p (ties toward smaller ids), renormalized. top_p >= 1 is the
// identity.
std::vector<double> top_p_filter(std::vector<double> dist, double top_p);

// Inverse-CDF walk; u in [0, 1).
token_t sample_from(std::span<const double> dist, double u);

token_t argmax_token(std::span<const float> row);

}  // namespace swift
