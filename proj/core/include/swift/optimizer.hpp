#pragma once

#include <utility>
#include <vector>

#include "swift/verify.hpp"

namespace swift {

enum class Phase { kContextAccumulation, kOptimizing, kAccelerating };
const char* phase_name(Phase p);

// Teacher-forcing window over the most recent committed generated tokens:
// inputs are the predecessors, targets the window itself.
struct ContextBuffer {
  std::vector<token_t> inputs;
  std::vector<token_t> targets;
};

struct OptimizerConfig {
  int gamma = 32;              // context window
  int max_steps = 1000;        // S
  int bayes_interval = 25;     // beta
  int patience = 300;          // non-improving steps before termination
  double score_target = 0.95;  // terminate once best matchness exceeds this
  double skip_ratio = 0.45;    // r
  double alpha_tolerance = 0.7;
  double gp_length_scale = 1.0;
  double gp_noise = 1e-6;
  double ei_xi = 0.01;
  // Below this many valid masks the acquisition argmax is exact enumeration;
  // above it, seeded multi-start swap-move search.
  int ei_exhaustive_limit = 4096;
  int ei_starts = 16;
  bool force_zero_mask = false;  // diagnostic: pin drafting to the full model
};

// RBF-kernel GP over masks embedded as hypercube vertices, with
// expected-improvement acquisition. Duplicate masks update in place.
class GpSurrogate {
 public:
  void add(const LayerMask& mask, double score);
  void clear();
  size_t size() const { return masks_.size(); }
  double best_score() const;
  // Posterior (mean, stddev); requires at least one observation.
  std::pair<double, double> posterior(const std::vector<uint8_t>& bits, double length_scale,
                                      double noise) const;
  double expected_improvement(const std::vector<uint8_t>& bits, double best, double xi,
                              double length_scale, double noise) const;

 private:
  void ensure_fit(double length_scale, double noise) const;

  std::vector<std::vector<uint8_t>> masks_;
  std::vector<double> scores_;
  mutable std::vector<double> chol_;   // lower Cholesky of K + noise*I
  mutable std::vector<double> alpha_;  // (K + noise*I)^-1 (y - mean)
  mutable double y_mean_ = 0.0;
  mutable double fit_ls_ = -1.0, fit_noise_ = -1.0;
  mutable bool dirty_ = true;
};

struct BestEvent {
  int step = 0;
  std::vector<uint8_t> bits;
  double score = 0.0;
};

struct OptimizerState {
  Phase phase = Phase::kContextAccumulation;
  int step = 0;  // o, 1-based while optimizing
  int steps_since_improve = 0;
  LayerMask best_mask;
  double best_score = -1.0;  // unscored until the baseline evaluation
  bool baseline_scored = false;
  double skip_ratio = 0.45;
  GpSurrogate surrogate;
  OptimizerConfig cfg;
  int n_evals = 0;
  std::vector<BestEvent> best_history;
};

OptimizerState make_optimizer_state(int n_sublayers, const OptimizerConfig& cfg);

// Evenly spaced skip pattern over the interior sublayers. Sublayers 0 and
// L-1 are never skipped, here or by any suggestion.
LayerMask init_uniform_mask(int n_sublayers, double skip_ratio);

// Interval schedule: Bayesian acquisition when o % beta == 0, random search
// otherwise. The suggestion differs from the incumbent unless the space is
// exhausted.
LayerMask suggest(OptimizerState& state, Rng& rng);

// Matchness of one candidate: a single masked parallel forward teacher-forces
// the context window and counts exact argmax matches. The cache is unchanged.
double evaluate_candidate(const ModelBundle& m, KVCache& cache, const LayerMask& mask,
                          const ContextBuffer& ctx);

// Scores the incumbent once when optimization starts, so the first suggested
// candidate competes against the uniform baseline.
void score_baseline(OptimizerState& state, const ModelBundle& m, KVCache& cache,
                    const ContextBuffer& ctx);

// suggest -> evaluate -> record -> retain best -> termination check.
void optimize_step(OptimizerState& state, const ModelBundle& m, KVCache& cache,
                   const ContextBuffer& ctx, Rng& rng);

// Instance-boundary check during acceleration: below tolerance, the skip
// ratio drops by 0.1 (floor 0.1) and optimization restarts with a fresh
// surrogate and uniform mask. Returns true when re-optimization triggered.
bool check_alpha_tolerance(OptimizerState& state, double measured_alpha);

}  // namespace swift
