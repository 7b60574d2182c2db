#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "swift/tensor.hpp"

namespace swift {

using token_t = int32_t;

struct ArchConfig {
  int n_blocks = 0;
  int d_model = 0;
  int n_heads = 0;
  int d_ff = 0;
  int vocab_size = 0;
  int max_seq = 0;
  float norm_eps = 1e-5f;

  // Sublayers count attention and MLP separately: L = 2 * n_blocks,
  // ordered [attn_0, mlp_0, attn_1, mlp_1, ...].
  int n_sublayers() const { return 2 * n_blocks; }
  int head_dim() const { return d_model / n_heads; }
  void validate() const;
};

// Byte-level by default (ids 0..255 are raw bytes, then BOS/EOS/PAD); a bundle
// may carry an explicit string table instead for small vocabularies.
struct Tokenizer {
  bool byte_level = true;
  std::vector<std::string> pieces;
  token_t bos_id = 256;
  token_t eos_id = 257;
  token_t pad_id = 258;

  static Tokenizer bytes();
  static Tokenizer table(std::vector<std::string> pieces, token_t bos, token_t eos, token_t pad);
  // Smallest vocab this tokenizer is valid for.
  int min_vocab() const;
  std::vector<token_t> encode(std::string_view text, int vocab_size, bool add_bos) const;
  std::string decode(const std::vector<token_t>& ids) const;
};

struct TensorSpec {
  std::string name;
  std::vector<size_t> shape;
};

struct ModelBundle {
  ArchConfig config;
  std::map<std::string, Tensor> tensors;
  Tokenizer tokenizer;

  const Tensor& tensor(const std::string& name) const;
  void validate() const;
};

// Expected tensor set for a config, in canonical serialization order.
std::vector<TensorSpec> architecture_manifest(const ArchConfig& cfg);

// Container format "SWFT1": 5-byte magic, 8-byte little-endian header length,
// UTF-8 JSON header (config, tokenizer, tensor manifest with offsets), then
// concatenated raw little-endian f32 payloads. Round trips are bit-exact.
ModelBundle load_bundle(const std::string& path);
void save_bundle(const ModelBundle& bundle, const std::string& path);

// Seeded random-init model. Each planted sublayer gets a zeroed output
// projection so its residual contribution is exactly zero: skipping it
// changes no logits, which gives the optimizer a recoverable ground truth.
ModelBundle make_synthetic_model(uint64_t seed, const ArchConfig& cfg,
                                 const std::set<int>& planted_noop_sublayers);

}  // namespace swift
