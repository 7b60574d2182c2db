#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace swift {

// Binary skip set over the 2*n_blocks sublayers, ordered
// [attn_0, mlp_0, attn_1, mlp_1, ...]. bits[i] == 1 bypasses sublayer i when
// drafting; the all-zero mask is the full target model.
struct LayerMask {
  std::vector<uint8_t> bits;
  double skip_ratio = 0.0;

  static LayerMask zeros(size_t n_sublayers) {
    return LayerMask{std::vector<uint8_t>(n_sublayers, 0), 0.0};
  }

  size_t size() const { return bits.size(); }

  size_t popcount() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b != 0;
    return n;
  }

  bool all_zero() const { return popcount() == 0; }

  // Identity is the bit pattern; skip_ratio is bookkeeping.
  bool operator==(const LayerMask& o) const { return bits == o.bits; }

  uint64_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint8_t b : bits) {
      h ^= b;
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

}  // namespace swift
