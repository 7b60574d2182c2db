#include "swift/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swift {

token_t argmax_token(std::span<const float> row) {
  return static_cast<token_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<double> top_p_filter(std::vector<double> dist, double top_p) {
  if (!(top_p > 0.0) || top_p > 1.0) throw OutOfRange("top_p must lie in (0, 1]");
  if (top_p >= 1.0) return dist;
  std::vector<int> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  double cum = 0.0;
  size_t kept = 0;
  for (; kept < idx.size(); ++kept) {
    cum += dist[idx[kept]];
    if (cum >= top_p) {
      ++kept;
      break;
    }
  }
  std::vector<double> out(dist.size(), 0.0);
  for (size_t i = 0; i < kept; ++i) out[idx[i]] = dist[idx[i]];
  for (double& x : out) x /= cum;
  return out;
}

token_t sample_from(std::span<const double> dist, double u) {
  double cum = 0.0;
  token_t last_positive = -1;
  for (size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = static_cast<token_t>(i);
    cum += dist[i];
    if (u < cum) return last_positive;
  }
  if (last_positive < 0) throw InvalidDistribution("cannot sample from an all-zero distribution");
  return last_positive;  // float shortfall at the tail
}

AcceptResult spec_sample_accept(std::span<const double> target_dist,
                                std::span<const double> draft_dist, token_t draft_token, double u,
                                Rng& rng) {
  if (target_dist.size() != draft_dist.size())
    throw InvalidDistribution("distribution sizes differ");
  if (draft_token < 0 || static_cast<size_t>(draft_token) >= draft_dist.size())
    throw InvalidDistribution("draft token outside the distribution");
  double ts = 0.0, ds = 0.0;
  for (size_t i = 0; i < target_dist.size(); ++i) {
    if (target_dist[i] < 0.0 || draft_dist[i] < 0.0)
      throw InvalidDistribution("negative probability");
    ts += target_dist[i];
    ds += draft_dist[i];
  }
  if (std::abs(ts - 1.0) > 1e-6 || std::abs(ds - 1.0) > 1e-6)
    throw InvalidDistribution("distribution does not sum to 1");
  const double dp = draft_dist[static_cast<size_t>(draft_token)];
  if (!(dp > 0.0)) throw InvalidDistribution("draft token has zero proposal mass");

  const double ratio = target_dist[static_cast<size_t>(draft_token)] / dp;
  if (u < std::min(1.0, ratio)) return {true, draft_token, false};
  const auto res = residual_distribution<double>(target_dist, draft_dist);
  return {false, sample_from(res, rng.uniform()), true};
}

VerifyOutcome verify_greedy(const ModelBundle& m, KVCache& cache, const DraftTree& tree,
                            token_t pending, const VerifyLimits& limits) {
  const Linearized lin = linearize(tree);
  const size_t C = cache.committed_len();

  // Input row 0 is the pending token; tree nodes follow shifted by one.
  std::vector<token_t> input;
  input.reserve(1 + lin.tokens.size());
  input.push_back(pending);
  input.insert(input.end(), lin.tokens.begin(), lin.tokens.end());
  std::vector<int32_t> parents(input.size());
  parents[0] = -1;
  for (size_t i = 0; i < lin.tokens.size(); ++i)
    parents[i + 1] = lin.attn.parents[i] < 0 ? 0 : lin.attn.parents[i] + 1;

  const LogitsBlock lb = forward(m, cache, input, LayerMask::zeros(m.config.n_sublayers()),
                                 AttnSpec::tree(std::move(parents)), false);

  const size_t max_emit = std::max<size_t>(1, limits.max_emit);
  std::vector<token_t> emitted;
  std::vector<size_t> commit_rows{C};  // pending token's row, written in place
  int cur_row = 0;
  bool closed = false;
  for (size_t j = 0; j < tree.spine_len(); ++j) {
    if (emitted.size() + 1 >= max_emit) break;  // close with the token at cur_row
    const token_t t = argmax_token(lb.row(cur_row));
    const auto& sibs = tree.steps[j].siblings;
    const auto it = std::find(sibs.begin(), sibs.end(), t);
    if (it == sibs.end()) {
      emitted.push_back(t);  // correction token ends the batch
      closed = true;
      break;
    }
    const size_t rank = static_cast<size_t>(it - sibs.begin());
    emitted.push_back(t);
    const int node_row = 1 + lin.depth_nodes[j][rank];
    commit_rows.push_back(C + static_cast<size_t>(node_row));
    cur_row = node_row;
    if (rank != 0) break;  // deeper spine context assumed the spine token
  }
  if (!closed) emitted.push_back(argmax_token(lb.row(cur_row)));  // bonus token

  if (limits.stop != nullptr && !limits.stop->empty()) {
    for (size_t i = 0; i < emitted.size(); ++i) {
      if (limits.stop->count(emitted[i])) {
        emitted.resize(i + 1);
        break;
      }
    }
  }
  commit_rows.resize(emitted.size());
  cache.commit_scratch(commit_rows);

  VerifyOutcome out;
  out.accepted_draft_count = emitted.size() - 1;
  out.accepted_tokens = std::move(emitted);
  out.draft_spine_len = tree.spine_len();
  return out;
}

VerifyOutcome verify_sampling(const ModelBundle& m, KVCache& cache, const DraftTree& tree,
                              token_t pending, double temperature, double top_p, Rng& rng,
                              const VerifyLimits& limits) {
  if (tree.steps.empty()) throw EmptyTree("cannot verify an empty draft tree");
  const size_t C = cache.committed_len();

  std::vector<token_t> input;
  input.reserve(1 + tree.spine_len());
  input.push_back(pending);
  for (const auto& s : tree.steps) input.push_back(s.token);

  const LogitsBlock lb =
      forward(m, cache, input, LayerMask::zeros(m.config.n_sublayers()), AttnSpec::causal(), false);

  const size_t max_emit = std::max<size_t>(1, limits.max_emit);
  const size_t horizon = std::min(tree.spine_len(), max_emit - 1);
  std::vector<token_t> emitted;
  std::vector<size_t> commit_rows{C};
  bool closed = false;
  for (size_t j = 0; j < horizon; ++j) {
    const auto target = top_p_filter(softmax_row(lb.row(static_cast<int>(j)), temperature), top_p);
    const AcceptResult r =
        spec_sample_accept(target, tree.steps[j].draft_dist, tree.steps[j].token, rng.uniform(), rng);
    emitted.push_back(r.token);
    if (!r.accepted) {
      closed = true;
      break;
    }
    commit_rows.push_back(C + 1 + j);
  }
  if (!closed) {
    const auto target =
        top_p_filter(softmax_row(lb.row(static_cast<int>(horizon)), temperature), top_p);
    emitted.push_back(sample_from(target, rng.uniform()));  // bonus token
  }

  if (limits.stop != nullptr && !limits.stop->empty()) {
    for (size_t i = 0; i < emitted.size(); ++i) {
      if (limits.stop->count(emitted[i])) {
        emitted.resize(i + 1);
        break;
      }
    }
  }
  commit_rows.resize(emitted.size());
  cache.commit_scratch(commit_rows);

  VerifyOutcome out;
  out.accepted_draft_count = emitted.size() - 1;
  out.accepted_tokens = std::move(emitted);
  out.draft_spine_len = tree.spine_len();
  return out;
}

}  // namespace swift
