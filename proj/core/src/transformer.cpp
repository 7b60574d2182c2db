#include "swift/transformer.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "swift/error.hpp"

namespace swift {

namespace {

// Fixed 4-lane accumulation order. Every dot product in the engine goes
// through here, so sequential, tree, and rebuilt-from-scratch forwards see
// identical arithmetic.
float dot(const float* a, const float* b, int n) {
  float acc0 = 0.0f, acc1 = 0.0f, acc2 = 0.0f, acc3 = 0.0f;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) acc0 += a[i] * b[i];
  return (acc0 + acc1) + (acc2 + acc3);
}

// w: [rows, cols] row-major.
void matvec(const Tensor& w, const float* x, float* out) {
  const int rows = static_cast<int>(w.shape[0]);
  const int cols = static_cast<int>(w.shape[1]);
  const float* data = w.data.data();
  for (int r = 0; r < rows; ++r) out[r] = dot(data + static_cast<size_t>(r) * cols, x, cols);
}

void rmsnorm(const float* x, const float* weight, int n, float eps, float* out) {
  const float ss = dot(x, x, n);
  const float inv = 1.0f / std::sqrt(ss / static_cast<float>(n) + eps);
  for (int i = 0; i < n; ++i) out[i] = x[i] * inv * weight[i];
}

void rope_inplace(float* vec, int n_heads, int head_dim, int64_t pos) {
  const int half = head_dim / 2;
  for (int t = 0; t < half; ++t) {
    const double theta =
        static_cast<double>(pos) * std::pow(10000.0, -2.0 * t / static_cast<double>(head_dim));
    const float c = static_cast<float>(std::cos(theta));
    const float s = static_cast<float>(std::sin(theta));
    for (int h = 0; h < n_heads; ++h) {
      float* v = vec + h * head_dim;
      const float a = v[t];
      const float b = v[t + half];
      v[t] = a * c - b * s;
      v[t + half] = a * s + b * c;
    }
  }
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

}  // namespace

LogitsBlock forward(const ModelBundle& m, KVCache& cache, std::span<const token_t> tokens,
                    const LayerMask& mask, const AttnSpec& attn, bool commit, int64_t base_pos) {
  const ArchConfig& cfg = m.config;
  const int T = static_cast<int>(tokens.size());
  if (T == 0) throw Error("forward: empty token block");
  if (static_cast<int>(mask.bits.size()) != cfg.n_sublayers())
    throw MaskLengthMismatch("mask has " + std::to_string(mask.bits.size()) +
                             " bits, model has " + std::to_string(cfg.n_sublayers()) +
                             " sublayers");
  for (token_t t : tokens)
    if (t < 0 || t >= cfg.vocab_size) throw Error("forward: token id out of vocab");

  const size_t C = cache.committed_len();
  const size_t S = cache.scratch_len();
  const size_t P = base_pos < 0 ? C : static_cast<size_t>(base_pos);
  if (P > C) throw Error("forward: base_pos beyond committed prefix");
  const size_t cont = S - C;  // continuation rows from prior uncommitted forwards

  std::vector<int32_t> parent(T);
  if (attn.mode == AttnSpec::Mode::kCausal) {
    for (int i = 0; i < T; ++i) parent[i] = i - 1;
  } else {
    if (static_cast<int>(attn.parents.size()) != T)
      throw DanglingAncestor("tree spec has wrong arity");
    for (int i = 0; i < T; ++i) {
      const int32_t p = attn.parents[i];
      if (p < -1 || p >= i) throw DanglingAncestor("row " + std::to_string(i) + " parent " +
                                                   std::to_string(p) + " is not an earlier row");
      parent[i] = p;
    }
  }

  if (commit) {
    if (attn.mode != AttnSpec::Mode::kCausal || P != C || cont != 0 || !mask.all_zero())
      throw Error("forward: commit requires a causal all-zero-mask block at the boundary");
  }

  std::vector<int32_t> depth(T);
  for (int i = 0; i < T; ++i) depth[i] = parent[i] < 0 ? 0 : depth[parent[i]] + 1;
  for (int i = 0; i < T; ++i) {
    const size_t pos = P + cont + static_cast<size_t>(depth[i]);
    if (pos >= cache.max_positions()) throw CacheOverflow("position exceeds max_seq");
  }
  if (S + static_cast<size_t>(T) > cache.capacity_rows())
    throw CacheOverflow("scratch rows exceed cache capacity");

  // In-block ancestor chains, root first.
  std::vector<std::vector<int32_t>> chain(T);
  for (int i = 0; i < T; ++i) {
    if (parent[i] >= 0) {
      chain[i] = chain[parent[i]];
      chain[i].push_back(parent[i]);
    }
  }

  const int d = cfg.d_model;
  const int H = cfg.n_heads;
  const int hd = cfg.head_dim();
  const int dff = cfg.d_ff;
  const float eps = cfg.norm_eps;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  const Tensor& embed = m.tensor("tok_embed.weight");
  const Tensor& out_norm = m.tensor("out_norm.weight");
  const Tensor& lm_head = m.tensor("lm_head.weight");
  struct BlockWeights {
    const Tensor *attn_norm, *wq, *wk, *wv, *wo, *mlp_norm, *w_in, *w_out;
  };
  std::vector<BlockWeights> blocks(cfg.n_blocks);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "blk" + std::to_string(b) + ".";
    blocks[b] = {&m.tensor(p + "attn_norm.weight"), &m.tensor(p + "attn.wq.weight"),
                 &m.tensor(p + "attn.wk.weight"),   &m.tensor(p + "attn.wv.weight"),
                 &m.tensor(p + "attn.wo.weight"),   &m.tensor(p + "mlp_norm.weight"),
                 &m.tensor(p + "mlp.w_in.weight"),  &m.tensor(p + "mlp.w_out.weight")};
  }

  LogitsBlock out;
  out.rows = T;
  out.vocab = cfg.vocab_size;
  out.data.resize(static_cast<size_t>(T) * cfg.vocab_size);

  std::vector<float> h(d), xn(d), q(d), k(d), v(d), attn_out(d), proj(d), ff(dff);
  std::vector<size_t> rows;
  std::vector<float> scores;

  for (int i = 0; i < T; ++i) {
    const size_t my_row = S + static_cast<size_t>(i);
    const int64_t my_pos = static_cast<int64_t>(P + cont) + depth[i];
    std::memcpy(h.data(), embed.data.data() + static_cast<size_t>(tokens[i]) * d,
                static_cast<size_t>(d) * sizeof(float));

    for (int b = 0; b < cfg.n_blocks; ++b) {
      if (!mask.bits[2 * b]) {
        rmsnorm(h.data(), blocks[b].attn_norm->data.data(), d, eps, xn.data());
        matvec(*blocks[b].wq, xn.data(), q.data());
        matvec(*blocks[b].wk, xn.data(), k.data());
        matvec(*blocks[b].wv, xn.data(), v.data());
        rope_inplace(q.data(), H, hd, my_pos);
        rope_inplace(k.data(), H, hd, my_pos);
        std::memcpy(cache.k_row(b, my_row), k.data(), static_cast<size_t>(d) * sizeof(float));
        std::memcpy(cache.v_row(b, my_row), v.data(), static_cast<size_t>(d) * sizeof(float));
        cache.note_block_write(b, my_row + 1);

        // Attended rows in ascending position order: committed prefix,
        // continuation chain, in-block ancestors, self.
        rows.clear();
        for (size_t r = 0; r < P; ++r) rows.push_back(r);
        if (cont > 0) {
          if (cache.block_valid(b) < S)
            throw Error("forward: continuation hole (mask changed without rollback)");
          for (size_t r = C; r < S; ++r) rows.push_back(r);
        }
        for (int32_t a : chain[i]) rows.push_back(S + static_cast<size_t>(a));
        rows.push_back(my_row);

        scores.resize(rows.size());
        for (int head = 0; head < H; ++head) {
          const float* qh = q.data() + head * hd;
          float mx = -std::numeric_limits<float>::infinity();
          for (size_t j = 0; j < rows.size(); ++j) {
            const float s = dot(qh, cache.k_row(b, rows[j]) + head * hd, hd) * scale;
            scores[j] = s;
            if (s > mx) mx = s;
          }
          float denom = 0.0f;
          for (size_t j = 0; j < rows.size(); ++j) {
            const float e = std::exp(scores[j] - mx);
            scores[j] = e;
            denom += e;
          }
          const float inv = 1.0f / denom;
          float* oh = attn_out.data() + head * hd;
          std::memset(oh, 0, static_cast<size_t>(hd) * sizeof(float));
          for (size_t j = 0; j < rows.size(); ++j) {
            const float w = scores[j] * inv;
            const float* vh = cache.v_row(b, rows[j]) + head * hd;
            for (int t = 0; t < hd; ++t) oh[t] += w * vh[t];
          }
        }
        matvec(*blocks[b].wo, attn_out.data(), proj.data());
        for (int t = 0; t < d; ++t) h[t] += proj[t];
      }

      if (!mask.bits[2 * b + 1]) {
        rmsnorm(h.data(), blocks[b].mlp_norm->data.data(), d, eps, xn.data());
        matvec(*blocks[b].w_in, xn.data(), ff.data());
        for (int t = 0; t < dff; ++t) ff[t] = silu(ff[t]);
        matvec(*blocks[b].w_out, ff.data(), proj.data());
        for (int t = 0; t < d; ++t) h[t] += proj[t];
      }
    }

    rmsnorm(h.data(), out_norm.data.data(), d, eps, xn.data());
    matvec(lm_head, xn.data(), out.data.data() + static_cast<size_t>(i) * cfg.vocab_size);
  }

  if (commit) {
    cache.commit_advance(static_cast<size_t>(T));
  } else {
    cache.note_scratch(S + static_cast<size_t>(T));
  }
  return out;
}

std::vector<double> softmax_row(std::span<const float> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw OutOfRange("softmax temperature must be positive");
  if (logits.empty()) throw NonFiniteInput("softmax over empty row");
  double mx = -std::numeric_limits<double>::infinity();
  for (float x : logits) {
    if (!std::isfinite(x)) throw NonFiniteInput("non-finite logit");
    const double v = static_cast<double>(x) / temperature;
    if (v > mx) mx = v;
  }
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) / temperature - mx);
    denom += out[i];
  }
  for (double& x : out) x /= denom;
  return out;
}

}  // namespace swift
