#include "swift/kv_cache.hpp"

#include <atomic>
#include <cstring>

#include "swift/error.hpp"

namespace swift {

namespace {
std::atomic<uint64_t> g_next_cache_id{1};
}

KVCache::KVCache(const ArchConfig& cfg, size_t scratch_overhang) {
  cfg.validate();
  max_pos_ = static_cast<size_t>(cfg.max_seq);
  capacity_ = max_pos_ + scratch_overhang;
  row_width_ = static_cast<size_t>(cfg.d_model);
  blocks_.resize(cfg.n_blocks);
  for (auto& b : blocks_) {
    b.k.assign(capacity_ * row_width_, 0.0f);
    b.v.assign(capacity_ * row_width_, 0.0f);
    b.valid = 0;
  }
  id_ = g_next_cache_id.fetch_add(1);
}

void KVCache::rollback(const CacheMark& mark) {
  if (mark.cache_id != id_) throw StaleMark("mark belongs to a different cache");
  if (mark.committed_len > committed_)
    throw StaleMark("mark is ahead of the current committed length");
  committed_ = mark.committed_len;
  scratch_ = committed_;
  for (auto& b : blocks_) b.valid = committed_;
}

void KVCache::reset() {
  committed_ = 0;
  scratch_ = 0;
  for (auto& b : blocks_) b.valid = 0;
}

void KVCache::commit_scratch(std::span<const size_t> rows) {
  for (size_t j = 0; j < rows.size(); ++j) {
    const size_t src = rows[j];
    const size_t dst = committed_ + j;
    if (src < dst) throw Error("commit_scratch: rows out of path order");
    if (src == dst) continue;
    for (auto& b : blocks_) {
      if (b.valid <= src) throw Error("commit_scratch: source row was never written");
      std::memcpy(b.k.data() + dst * row_width_, b.k.data() + src * row_width_,
                  row_width_ * sizeof(float));
      std::memcpy(b.v.data() + dst * row_width_, b.v.data() + src * row_width_,
                  row_width_ * sizeof(float));
    }
  }
  committed_ += rows.size();
  scratch_ = committed_;
  for (auto& b : blocks_) b.valid = committed_;
}

void KVCache::commit_advance(size_t n) {
  committed_ += n;
  scratch_ = committed_;
  for (auto& b : blocks_) b.valid = committed_;
}

void KVCache::note_block_write(int block, size_t row_end) {
  if (row_end > blocks_[block].valid) blocks_[block].valid = row_end;
}

void KVCache::note_scratch(size_t row_end) {
  if (row_end > scratch_) scratch_ = row_end;
}

}  // namespace swift
