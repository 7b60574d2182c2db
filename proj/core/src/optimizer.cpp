#include "swift/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "swift/error.hpp"

namespace swift {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kContextAccumulation: return "context_accumulation";
    case Phase::kOptimizing: return "optimizing";
    case Phase::kAccelerating: return "accelerating";
  }
  return "?";
}

namespace {

int hamming(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  int h = 0;
  for (size_t i = 0; i < a.size(); ++i) h += a[i] != b[i];
  return h;
}

double rbf(int hamming_dist, double length_scale) {
  return std::exp(-0.5 * hamming_dist / (length_scale * length_scale));
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846); }

int skip_count(int n_sublayers, double ratio) {
  return static_cast<int>(std::lround(ratio * n_sublayers));
}

// C(n, k) capped; exact integer arithmetic while below the cap.
unsigned long long combinations_capped(int n, int k, unsigned long long cap) {
  if (k < 0 || k > n) return 0;
  unsigned long long c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned long long>(n - k + i) / static_cast<unsigned long long>(i);
    if (c > cap) return cap + 1;
  }
  return c;
}

LayerMask mask_from_interior(int n_sublayers, const std::vector<int>& skipped) {
  LayerMask m = LayerMask::zeros(n_sublayers);
  for (int idx : skipped) m.bits[idx] = 1;
  return m;
}

// k distinct interior indices by partial Fisher-Yates; k draws per attempt.
LayerMask random_valid_mask(Rng& rng, int n_sublayers, int k, const LayerMask* avoid) {
  LayerMask m;
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<int> pool(n_sublayers - 2);
    for (size_t i = 0; i < pool.size(); ++i) pool[i] = 1 + static_cast<int>(i);
    m = LayerMask::zeros(n_sublayers);
    for (int i = 0; i < k; ++i) {
      const uint32_t j = i + rng.below(static_cast<uint32_t>(pool.size() - i));
      std::swap(pool[i], pool[j]);
      m.bits[pool[i]] = 1;
    }
    if (avoid == nullptr || !(m == *avoid)) return m;
  }
  return m;  // space exhausted (or nearly); repeating the incumbent is allowed
}

}  // namespace

void GpSurrogate::add(const LayerMask& mask, double score) {
  for (size_t i = 0; i < masks_.size(); ++i) {
    if (masks_[i] == mask.bits) {
      scores_[i] = score;
      dirty_ = true;
      return;
    }
  }
  masks_.push_back(mask.bits);
  scores_.push_back(score);
  dirty_ = true;
}

void GpSurrogate::clear() {
  masks_.clear();
  scores_.clear();
  chol_.clear();
  alpha_.clear();
  dirty_ = true;
}

double GpSurrogate::best_score() const {
  double best = -std::numeric_limits<double>::infinity();
  for (double s : scores_) best = std::max(best, s);
  return best;
}

void GpSurrogate::ensure_fit(double length_scale, double noise) const {
  if (!dirty_ && fit_ls_ == length_scale && fit_noise_ == noise) return;
  const int n = static_cast<int>(masks_.size());
  if (n == 0) throw Error("GP posterior requires at least one observation");

  y_mean_ = 0.0;
  for (double s : scores_) y_mean_ += s;
  y_mean_ /= n;

  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = rbf(hamming(masks_[i], masks_[j]), length_scale);
      K(i, j) = v;
      K(j, i) = v;
    }
    K(i, i) += noise;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw Error("GP kernel matrix is not positive definite");

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = scores_[i] - y_mean_;
  const Eigen::VectorXd a = llt.solve(y);
  const Eigen::MatrixXd L = llt.matrixL();

  chol_.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) chol_[static_cast<size_t>(i) * n + j] = L(i, j);
  alpha_.assign(a.data(), a.data() + n);
  fit_ls_ = length_scale;
  fit_noise_ = noise;
  dirty_ = false;
}

std::pair<double, double> GpSurrogate::posterior(const std::vector<uint8_t>& bits,
                                                 double length_scale, double noise) const {
  ensure_fit(length_scale, noise);
  const int n = static_cast<int>(masks_.size());
  std::vector<double> kstar(n);
  for (int i = 0; i < n; ++i) kstar[i] = rbf(hamming(masks_[i], bits), length_scale);

  double mean = y_mean_;
  for (int i = 0; i < n; ++i) mean += kstar[i] * alpha_[i];

  // v = L^-1 k*; forward substitution over the stored lower factor.
  std::vector<double> v(n);
  double vtv = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = kstar[i];
    const double* row = chol_.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < i; ++j) s -= row[j] * v[j];
    v[i] = s / row[i];
    vtv += v[i] * v[i];
  }
  const double var = std::max(1.0 - vtv, 0.0);
  return {mean, std::sqrt(var)};
}

double GpSurrogate::expected_improvement(const std::vector<uint8_t>& bits, double best, double xi,
                                         double length_scale, double noise) const {
  const auto [mean, sd] = posterior(bits, length_scale, noise);
  const double delta = mean - best - xi;
  if (sd < 1e-12) return std::max(delta, 0.0);
  const double z = delta / sd;
  return delta * norm_cdf(z) + sd * norm_pdf(z);
}

LayerMask init_uniform_mask(int n_sublayers, double skip_ratio) {
  if (!(skip_ratio > 0.0) || skip_ratio >= 1.0)
    throw RatioTooLarge("skip ratio must lie in (0, 1)");
  const int k = skip_count(n_sublayers, skip_ratio);
  if (k < 1) throw RatioTooLarge("skip ratio selects no sublayers");
  if (k > n_sublayers - 2)
    throw RatioTooLarge("skip ratio would skip an endpoint sublayer");
  const long long n = n_sublayers - 2;
  LayerMask mask = LayerMask::zeros(n_sublayers);
  mask.skip_ratio = skip_ratio;
  for (int i = 0; i < k; ++i) {
    const int idx = 1 + static_cast<int>((2LL * i + 1) * n / (2LL * k));  // centered stride
    mask.bits[idx] = 1;
  }
  if (mask.popcount() != static_cast<size_t>(k))
    throw Error("uniform mask construction collided");
  return mask;
}

OptimizerState make_optimizer_state(int n_sublayers, const OptimizerConfig& cfg) {
  OptimizerState st;
  st.cfg = cfg;
  st.skip_ratio = cfg.skip_ratio;
  if (cfg.force_zero_mask) {
    st.best_mask = LayerMask::zeros(n_sublayers);
    st.best_score = 1.0;
    st.baseline_scored = true;
    st.phase = Phase::kAccelerating;
  } else {
    st.best_mask = init_uniform_mask(n_sublayers, cfg.skip_ratio);
    st.best_history.push_back({0, st.best_mask.bits, -1.0});
  }
  return st;
}

namespace {

LayerMask suggest_bayesian(OptimizerState& state, Rng& rng, int n_sublayers, int k) {
  const OptimizerConfig& cfg = state.cfg;
  const double best = state.best_score;
  auto ei = [&](const std::vector<uint8_t>& bits) {
    return state.surrogate.expected_improvement(bits, best, cfg.ei_xi, cfg.gp_length_scale,
                                                cfg.gp_noise);
  };

  std::vector<uint8_t> winner;
  double winner_ei = -std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<uint8_t>& bits) {
    if (bits == state.best_mask.bits) return;
    const double e = ei(bits);
    if (e > winner_ei) {
      winner_ei = e;
      winner = bits;
    }
  };

  const unsigned long long space =
      combinations_capped(n_sublayers - 2, k, static_cast<unsigned long long>(cfg.ei_exhaustive_limit));
  if (space <= static_cast<unsigned long long>(cfg.ei_exhaustive_limit)) {
    // Exact acquisition argmax over every valid mask.
    std::vector<int> c(k);
    for (int i = 0; i < k; ++i) c[i] = 1 + i;
    const int hi = n_sublayers - 2;
    while (true) {
      consider(mask_from_interior(n_sublayers, c).bits);
      int i = k - 1;
      while (i >= 0 && c[i] == hi - (k - 1 - i)) --i;
      if (i < 0) break;
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
    }
  } else {
    // Seeded restarts: swap neighborhood of the incumbent plus random probes.
    std::vector<int> skipped, open;
    for (int i = 1; i < n_sublayers - 1; ++i) {
      (state.best_mask.bits[i] ? skipped : open).push_back(i);
    }
    int budget = 256;
    for (int a : skipped) {
      for (int b : open) {
        if (budget-- <= 0) break;
        std::vector<uint8_t> bits = state.best_mask.bits;
        bits[a] = 0;
        bits[b] = 1;
        consider(bits);
      }
      if (budget <= 0) break;
    }
    for (int t = 0; t < 16 * cfg.ei_starts; ++t)
      consider(random_valid_mask(rng, n_sublayers, k, nullptr).bits);
  }

  if (winner.empty()) return state.best_mask;  // single-point space
  LayerMask out;
  out.bits = std::move(winner);
  return out;
}

}  // namespace

LayerMask suggest(OptimizerState& state, Rng& rng) {
  const int n_sublayers = static_cast<int>(state.best_mask.size());
  const int k = skip_count(n_sublayers, state.skip_ratio);
  LayerMask cand;
  const bool bayesian =
      state.cfg.bayes_interval > 0 && state.step % state.cfg.bayes_interval == 0;
  if (bayesian && state.surrogate.size() > 0) {
    cand = suggest_bayesian(state, rng, n_sublayers, k);
  } else {
    cand = random_valid_mask(rng, n_sublayers, k, &state.best_mask);
  }
  cand.skip_ratio = state.skip_ratio;
  return cand;
}

double evaluate_candidate(const ModelBundle& m, KVCache& cache, const LayerMask& mask,
                          const ContextBuffer& ctx) {
  const size_t gamma = ctx.targets.size();
  if (gamma == 0 || ctx.inputs.size() != gamma)
    throw InsufficientContext("context buffer is not a full window");
  const size_t committed = cache.committed_len();
  if (committed < gamma) throw InsufficientContext("window exceeds committed history");

  const CacheMark mark = cache.checkpoint();
  const LogitsBlock lb = forward(m, cache, ctx.inputs, mask, AttnSpec::causal(), false,
                                 static_cast<int64_t>(committed - gamma));
  size_t matches = 0;
  for (size_t i = 0; i < gamma; ++i)
    matches += argmax_token(lb.row(static_cast<int>(i))) == ctx.targets[i];
  cache.rollback(mark);
  return static_cast<double>(matches) / static_cast<double>(gamma);
}

void score_baseline(OptimizerState& state, const ModelBundle& m, KVCache& cache,
                    const ContextBuffer& ctx) {
  if (state.baseline_scored) return;
  state.best_score = evaluate_candidate(m, cache, state.best_mask, ctx);
  state.baseline_scored = true;
  state.n_evals += 1;
  state.surrogate.add(state.best_mask, state.best_score);
  state.best_history.push_back({state.step, state.best_mask.bits, state.best_score});
}

void optimize_step(OptimizerState& state, const ModelBundle& m, KVCache& cache,
                   const ContextBuffer& ctx, Rng& rng) {
  if (state.phase != Phase::kOptimizing)
    throw Error("optimize_step called outside the optimizing phase");
  state.step += 1;
  const LayerMask cand = suggest(state, rng);
  const double score = evaluate_candidate(m, cache, cand, ctx);
  state.n_evals += 1;
  state.surrogate.add(cand, score);
  if (score > state.best_score) {  // ties break toward the incumbent
    state.best_score = score;
    state.best_mask = cand;
    state.steps_since_improve = 0;
    state.best_history.push_back({state.step, cand.bits, score});
  } else {
    state.steps_since_improve += 1;
  }
  if (state.best_score > state.cfg.score_target ||
      state.steps_since_improve >= state.cfg.patience || state.step >= state.cfg.max_steps) {
    state.phase = Phase::kAccelerating;
  }
}

bool check_alpha_tolerance(OptimizerState& state, double measured_alpha) {
  if (state.phase != Phase::kAccelerating || state.cfg.force_zero_mask) return false;
  if (measured_alpha >= state.cfg.alpha_tolerance) return false;
  const int n_sublayers = static_cast<int>(state.best_mask.size());
  state.skip_ratio = std::max(0.1, std::round((state.skip_ratio - 0.1) * 10.0) / 10.0);
  state.best_mask = init_uniform_mask(n_sublayers, state.skip_ratio);
  state.best_score = -1.0;
  state.baseline_scored = false;
  state.surrogate.clear();
  state.step = 0;
  state.steps_since_improve = 0;
  state.phase = Phase::kOptimizing;
  state.best_history.push_back({0, state.best_mask.bits, -1.0});
  return true;
}

}  // namespace swift
