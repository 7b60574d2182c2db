#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "swift/model.hpp"

namespace swift {

struct CacheMark {
  uint64_t cache_id = 0;
  size_t committed_len = 0;
};

// Per attention-sublayer K/V history. Rows [0, committed_len) are
// authoritative (written by full-model forwards) and never mutated; rows
// above are draft scratch, reclaimed by rollback or promoted by
// commit_scratch. A skipped attention sublayer writes no scratch rows, so
// each sublayer tracks its own valid watermark.
class KVCache {
 public:
  KVCache(const ArchConfig& cfg, size_t scratch_overhang = 0);

  size_t committed_len() const { return committed_; }
  size_t scratch_len() const { return scratch_; }
  size_t capacity_rows() const { return capacity_; }
  size_t max_positions() const { return max_pos_; }
  int n_kv_blocks() const { return static_cast<int>(blocks_.size()); }
  size_t row_width() const { return row_width_; }

  CacheMark checkpoint() const { return CacheMark{id_, committed_}; }
  void rollback(const CacheMark& mark);
  void reset();

  // Promotes scratch rows (absolute indices, accepted-path order) to the
  // committed region and drops everything else above it.
  void commit_scratch(std::span<const size_t> rows);
  // Commit path for causal full-model forwards that wrote rows
  // [committed, committed + n) in place.
  void commit_advance(size_t n);

  float* k_row(int block, size_t row) { return blocks_[block].k.data() + row * row_width_; }
  float* v_row(int block, size_t row) { return blocks_[block].v.data() + row * row_width_; }
  const float* k_row(int block, size_t row) const {
    return blocks_[block].k.data() + row * row_width_;
  }
  const float* v_row(int block, size_t row) const {
    return blocks_[block].v.data() + row * row_width_;
  }

  size_t block_valid(int block) const { return blocks_[block].valid; }
  void note_block_write(int block, size_t row_end);
  void note_scratch(size_t row_end);

 private:
  struct BlockKV {
    std::vector<float> k, v;
    size_t valid = 0;
  };
  std::vector<BlockKV> blocks_;
  size_t row_width_ = 0;
  size_t committed_ = 0;
  size_t scratch_ = 0;
  size_t capacity_ = 0;
  size_t max_pos_ = 0;
  uint64_t id_ = 0;
};

}  // namespace swift
