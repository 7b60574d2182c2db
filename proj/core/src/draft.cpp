#include "swift/draft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swift/error.hpp"
#include "swift/verify.hpp"

namespace swift {

int k_for_confidence(double p) {
  if (!std::isfinite(p) || !(p > 0.0) || p > 1.0)
    throw OutOfRange("confidence must lie in (0, 1]");
  if (p <= 0.5) return 10;
  if (p <= 0.8) return 5;
  if (p <= 0.95) return 3;
  return 1;
}

int k_for_confidence(double p, int vocab_size) {
  return std::min(k_for_confidence(p), vocab_size);
}

namespace {

// Top-k token ids by probability, ties broken toward smaller ids so the
// leading entry always equals the greedy argmax.
std::vector<token_t> top_k_tokens(const std::vector<double>& dist, int k) {
  std::vector<token_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](token_t a, token_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  idx.resize(static_cast<size_t>(std::min<int>(k, static_cast<int>(idx.size()))));
  return idx;
}

}  // namespace

DraftTree draft(const ModelBundle& m, KVCache& cache, const LayerMask& mask, token_t pending,
                const DraftParams& params, Rng* rng) {
  if (!(params.epsilon >= 0.0) || params.epsilon >= 1.0)
    throw OutOfRange("epsilon must lie in [0, 1)");
  if (params.max_steps < 1) throw OutOfRange("max draft length must be >= 1");
  if (params.mode == DecodeMode::kSample && rng == nullptr)
    throw Error("draft: sampling mode needs an rng");

  const CacheMark mark = cache.checkpoint();
  DraftTree tree;
  token_t cur = pending;
  for (int j = 0; j < params.max_steps; ++j) {
    const LogitsBlock lb =
        forward(m, cache, std::span<const token_t>(&cur, 1), mask, AttnSpec::causal(), false);
    const std::vector<double> dist1 = softmax_row(lb.row(0), 1.0);
    const auto arg = static_cast<token_t>(
        std::max_element(dist1.begin(), dist1.end()) - dist1.begin());
    DraftStep step;
    step.confidence = dist1[static_cast<size_t>(arg)];
    if (params.mode == DecodeMode::kGreedy) {
      step.token = arg;
      const int k = k_for_confidence(step.confidence, m.config.vocab_size);
      step.siblings = top_k_tokens(dist1, k);
      step.draft_dist = dist1;
    } else {
      auto proposal = top_p_filter(softmax_row(lb.row(0), params.temperature), params.top_p);
      step.token = sample_from(proposal, rng->uniform());
      step.siblings = {step.token};
      step.draft_dist = std::move(proposal);
    }
    const double conf = step.confidence;
    tree.steps.push_back(std::move(step));
    cur = tree.steps.back().token;
    if (conf < params.epsilon) break;
  }
  cache.rollback(mark);
  return tree;
}

Linearized linearize(const DraftTree& tree) {
  if (tree.steps.empty()) throw EmptyTree("cannot linearize an empty draft tree");
  Linearized out;
  out.attn.mode = AttnSpec::Mode::kTree;
  out.depth_nodes.resize(tree.steps.size());
  int32_t prev_spine = -1;
  for (size_t d = 0; d < tree.steps.size(); ++d) {
    const DraftStep& step = tree.steps[d];
    const int32_t spine_row = static_cast<int32_t>(out.tokens.size());
    out.tokens.push_back(step.siblings.empty() ? step.token : step.siblings[0]);
    out.attn.parents.push_back(prev_spine);
    out.depth_nodes[d].push_back(spine_row);
    for (size_t s = 1; s < step.siblings.size(); ++s) {
      out.depth_nodes[d].push_back(static_cast<int32_t>(out.tokens.size()));
      out.tokens.push_back(step.siblings[s]);
      out.attn.parents.push_back(prev_spine);
    }
    prev_spine = spine_row;
  }
  return out;
}

}  // namespace swift
