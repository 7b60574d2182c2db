#pragma once

#include <vector>

#include "swift/rng.hpp"
#include "swift/transformer.hpp"

namespace swift {

enum class DecodeMode { kGreedy, kSample };

struct DraftStep {
  token_t token = 0;              // spine continuation: top-1 (greedy) or sampled
  double confidence = 0.0;        // max of the temperature-1 draft distribution
  std::vector<token_t> siblings;  // top-k candidates, descending probability, spine token first
  std::vector<double> draft_dist; // proposal law retained for sampling acceptance
};

// Caterpillar tree: autoregression continues only through each step's spine
// token; non-top-1 siblings are leaves.
struct DraftTree {
  std::vector<DraftStep> steps;

  size_t spine_len() const { return steps.size(); }
  size_t linear_len() const {
    size_t n = 0;
    for (const auto& s : steps) n += s.siblings.size();
    return n;
  }
};

struct DraftParams {
  DecodeMode mode = DecodeMode::kGreedy;
  double epsilon = 0.3;  // early-stop confidence threshold
  int max_steps = 25;    // maximum draft length
  double temperature = 1.0;
  double top_p = 1.0;
};

// Confidence buckets: 10 for p in (0, 0.5], 5 for (0.5, 0.8], 3 for
// (0.8, 0.95], 1 for (0.95, 1]. Bucket edges belong to the lower bucket.
int k_for_confidence(double p);
int k_for_confidence(double p, int vocab_size);

// Autoregressive drafting with the layer-skipped model starting from the
// pending token. Each step is recorded before the early-stop check, so a
// low-confidence step still enters the tree with its large candidate set.
// The cache is rolled back to its entry state before returning. Sampling
// mode consumes one rng draw per drafted token.
DraftTree draft(const ModelBundle& m, KVCache& cache, const LayerMask& mask, token_t pending,
                const DraftParams& params, Rng* rng = nullptr);

struct Linearized {
  std::vector<token_t> tokens;
  AttnSpec attn;  // parents relative to tree nodes; -1 attaches to the prefix
  std::vector<std::vector<int32_t>> depth_nodes;  // node index per depth, spine first
};

// Spine-then-siblings ordering per depth; the ancestor of every depth-j node
// is the depth-(j-1) spine node.
Linearized linearize(const DraftTree& tree);

}  // namespace swift
