#pragma once

#include <span>
#include <vector>

#include "swift/kv_cache.hpp"
#include "swift/mask.hpp"
#include "swift/model.hpp"

namespace swift {

// Attention pattern for one forward block. Causal chains each input row to
// its predecessor; tree mode supplies an explicit parent per input row
// (-1 attaches the row directly to the committed prefix). A row attends to
// the committed prefix, any uncommitted continuation chain, its ancestor
// chain within the block, and itself - never to uncommitted siblings.
struct AttnSpec {
  enum class Mode { kCausal, kTree };
  Mode mode = Mode::kCausal;
  std::vector<int32_t> parents;

  static AttnSpec causal() { return AttnSpec{Mode::kCausal, {}}; }
  static AttnSpec tree(std::vector<int32_t> parents) {
    return AttnSpec{Mode::kTree, std::move(parents)};
  }
};

struct LogitsBlock {
  int rows = 0;
  int vocab = 0;
  std::vector<float> data;  // row-major [rows x vocab]

  std::span<const float> row(int i) const {
    return {data.data() + static_cast<size_t>(i) * vocab, static_cast<size_t>(vocab)};
  }
};

// One deterministic forward pass over the masked model. Input rows land at
// cache scratch rows scratch_len()+i; rotary positions follow ancestor-path
// depth, so siblings share a position. base_pos overrides the logical
// position of the attachment point (default committed_len); candidate
// evaluation uses it to replay already-committed positions without touching
// their rows. commit=true is only valid for causal, all-zero-mask forwards
// starting at the committed boundary: committed rows must stay authoritative
// target rows. Identical inputs yield bit-identical logits.
LogitsBlock forward(const ModelBundle& m, KVCache& cache, std::span<const token_t> tokens,
                    const LayerMask& mask, const AttnSpec& attn, bool commit,
                    int64_t base_pos = -1);

// Max-subtracted softmax evaluated in double precision.
std::vector<double> softmax_row(std::span<const float> logits, double temperature);

}  // namespace swift
