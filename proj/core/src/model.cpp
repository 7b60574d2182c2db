#include "swift/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "swift/error.hpp"
#include "swift/rng.hpp"

namespace swift {

namespace {

constexpr char kMagic[5] = {'S', 'W', 'F', 'T', '1'};

using ojson = nlohmann::ordered_json;

std::string shape_str(const std::vector<size_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

void ArchConfig::validate() const {
  if (n_blocks < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || vocab_size < 1)
    throw ShapeMismatch("config: all dimensions must be >= 1");
  if (max_seq < 2) throw ShapeMismatch("config: max_seq must be >= 2");
  if (d_model % n_heads != 0)
    throw ShapeMismatch("config: d_model not divisible by n_heads");
  if (head_dim() % 2 != 0)
    throw ShapeMismatch("config: head_dim must be even for rotary embedding");
  if (!(norm_eps > 0.0f) || !std::isfinite(norm_eps))
    throw ShapeMismatch("config: norm_eps must be a small positive float");
}

Tokenizer Tokenizer::bytes() {
  Tokenizer t;
  t.byte_level = true;
  t.bos_id = 256;
  t.eos_id = 257;
  t.pad_id = 258;
  return t;
}

Tokenizer Tokenizer::table(std::vector<std::string> pieces, token_t bos, token_t eos, token_t pad) {
  Tokenizer t;
  t.byte_level = false;
  t.pieces = std::move(pieces);
  t.bos_id = bos;
  t.eos_id = eos;
  t.pad_id = pad;
  return t;
}

int Tokenizer::min_vocab() const {
  return byte_level ? 259 : static_cast<int>(pieces.size());
}

std::vector<token_t> Tokenizer::encode(std::string_view text, int vocab_size, bool add_bos) const {
  std::vector<token_t> out;
  out.reserve(text.size() + 1);
  if (add_bos) out.push_back(bos_id);
  if (byte_level) {
    for (unsigned char c : text) out.push_back(static_cast<token_t>(c));
  } else {
    // Lossy byte folding into the usable id range; ids 0..2 stay reserved for
    // pad/bos/eos in generated tables.
    const int usable = vocab_size - 3;
    for (unsigned char c : text) out.push_back(3 + static_cast<token_t>(c % usable));
  }
  return out;
}

std::string Tokenizer::decode(const std::vector<token_t>& ids) const {
  std::string out;
  for (token_t id : ids) {
    if (id == bos_id || id == eos_id || id == pad_id) continue;
    if (byte_level) {
      if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
    } else if (id >= 0 && id < static_cast<token_t>(pieces.size())) {
      out += pieces[id];
    }
  }
  return out;
}

const Tensor& ModelBundle::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw MissingTensor("missing tensor: " + name);
  return it->second;
}

std::vector<TensorSpec> architecture_manifest(const ArchConfig& cfg) {
  const size_t d = cfg.d_model, dff = cfg.d_ff, v = cfg.vocab_size;
  std::vector<TensorSpec> out;
  out.push_back({"tok_embed.weight", {v, d}});
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "blk" + std::to_string(b) + ".";
    out.push_back({p + "attn_norm.weight", {d}});
    out.push_back({p + "attn.wq.weight", {d, d}});
    out.push_back({p + "attn.wk.weight", {d, d}});
    out.push_back({p + "attn.wv.weight", {d, d}});
    out.push_back({p + "attn.wo.weight", {d, d}});
    out.push_back({p + "mlp_norm.weight", {d}});
    out.push_back({p + "mlp.w_in.weight", {dff, d}});
    out.push_back({p + "mlp.w_out.weight", {d, dff}});
  }
  out.push_back({"out_norm.weight", {d}});
  out.push_back({"lm_head.weight", {v, d}});
  return out;
}

void ModelBundle::validate() const {
  config.validate();
  if (tokenizer.min_vocab() > config.vocab_size)
    throw ShapeMismatch("tokenizer table larger than vocab_size");
  if (!tokenizer.byte_level &&
      static_cast<int>(tokenizer.pieces.size()) != config.vocab_size)
    throw ShapeMismatch("tokenizer table must have vocab_size entries");
  auto manifest = architecture_manifest(config);
  if (tensors.size() != manifest.size())
    throw ShapeMismatch("bundle has " + std::to_string(tensors.size()) +
                        " tensors, manifest expects " + std::to_string(manifest.size()));
  for (const auto& spec : manifest) {
    auto it = tensors.find(spec.name);
    if (it == tensors.end()) throw MissingTensor("missing tensor: " + spec.name);
    const Tensor& t = it->second;
    if (t.shape != spec.shape)
      throw ShapeMismatch("tensor " + spec.name + ": expected " + shape_str(spec.shape) +
                          ", got " + shape_str(t.shape));
    if (t.data.size() != t.numel())
      throw ShapeMismatch("tensor " + spec.name + ": data size does not match shape");
    for (float x : t.data)
      if (!std::isfinite(x)) throw NonFiniteWeight("non-finite value in tensor " + spec.name);
  }
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  bundle.validate();
  auto manifest = architecture_manifest(bundle.config);

  ojson header;
  header["format"] = 1;
  ojson cfg;
  cfg["n_blocks"] = bundle.config.n_blocks;
  cfg["d_model"] = bundle.config.d_model;
  cfg["n_heads"] = bundle.config.n_heads;
  cfg["d_ff"] = bundle.config.d_ff;
  cfg["vocab_size"] = bundle.config.vocab_size;
  cfg["max_seq"] = bundle.config.max_seq;
  cfg["norm_eps"] = bundle.config.norm_eps;
  header["config"] = cfg;

  ojson tok;
  if (bundle.tokenizer.byte_level) {
    tok["type"] = "byte";
  } else {
    tok["type"] = "table";
    tok["pieces"] = bundle.tokenizer.pieces;
    tok["bos"] = bundle.tokenizer.bos_id;
    tok["eos"] = bundle.tokenizer.eos_id;
    tok["pad"] = bundle.tokenizer.pad_id;
  }
  header["tokenizer"] = tok;

  ojson tens = ojson::array();
  uint64_t offset = 0;
  for (const auto& spec : manifest) {
    const Tensor& t = bundle.tensors.at(spec.name);
    ojson e;
    e["name"] = spec.name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    tens.push_back(e);
    offset += t.numel() * sizeof(float);
  }
  header["tensors"] = tens;

  const std::string hdr = header.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(kMagic, sizeof(kMagic));
  uint64_t hlen = hdr.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xff);
  f.write(lenbuf, 8);
  f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto& spec : manifest) {
    const Tensor& t = bundle.tensors.at(spec.name);
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  f.flush();
  if (!f) throw IoError("write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < sizeof(kMagic) + 8 || std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0)
    throw BadMagic("not a SWFT1 bundle: " + path);

  uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i)
    hlen |= static_cast<uint64_t>(static_cast<unsigned char>(raw[sizeof(kMagic) + i])) << (8 * i);
  const size_t header_end = sizeof(kMagic) + 8 + hlen;
  if (header_end > raw.size()) throw BadMagic("truncated header: " + path);

  ojson header;
  try {
    header = ojson::parse(raw.substr(sizeof(kMagic) + 8, hlen));
  } catch (const std::exception& e) {
    throw BadMagic(std::string("unparseable header: ") + e.what());
  }

  ModelBundle bundle;
  try {
    const auto& cfg = header.at("config");
    bundle.config.n_blocks = cfg.at("n_blocks").get<int>();
    bundle.config.d_model = cfg.at("d_model").get<int>();
    bundle.config.n_heads = cfg.at("n_heads").get<int>();
    bundle.config.d_ff = cfg.at("d_ff").get<int>();
    bundle.config.vocab_size = cfg.at("vocab_size").get<int>();
    bundle.config.max_seq = cfg.at("max_seq").get<int>();
    bundle.config.norm_eps = cfg.at("norm_eps").get<float>();

    const auto& tok = header.at("tokenizer");
    if (tok.at("type") == "byte") {
      bundle.tokenizer = Tokenizer::bytes();
    } else {
      bundle.tokenizer = Tokenizer::table(tok.at("pieces").get<std::vector<std::string>>(),
                                          tok.at("bos").get<token_t>(),
                                          tok.at("eos").get<token_t>(),
                                          tok.at("pad").get<token_t>());
    }
  } catch (const ojson::exception& e) {
    throw BadMagic(std::string("bad header field: ") + e.what());
  }
  bundle.config.validate();

  std::map<std::string, std::pair<std::vector<size_t>, uint64_t>> declared;
  for (const auto& e : header.at("tensors")) {
    declared[e.at("name").get<std::string>()] = {
        e.at("shape").get<std::vector<size_t>>(), e.at("offset").get<uint64_t>()};
  }

  const size_t payload_size = raw.size() - header_end;
  for (const auto& spec : architecture_manifest(bundle.config)) {
    auto it = declared.find(spec.name);
    if (it == declared.end()) throw MissingTensor("missing tensor: " + spec.name);
    const auto& [shape, offset] = it->second;
    if (shape != spec.shape)
      throw ShapeMismatch("tensor " + spec.name + ": expected " + shape_str(spec.shape) +
                          ", got " + shape_str(shape));
    Tensor t;
    t.shape = shape;
    const size_t bytes = t.numel() * sizeof(float);
    if (offset + bytes > payload_size)
      throw ShapeMismatch("tensor " + spec.name + ": payload truncated");
    t.data.resize(t.numel());
    std::memcpy(t.data.data(), raw.data() + header_end + offset, bytes);
    bundle.tensors.emplace(spec.name, std::move(t));
    declared.erase(it);
  }
  if (!declared.empty())
    throw ShapeMismatch("unexpected tensor in bundle: " + declared.begin()->first);

  bundle.validate();
  return bundle;
}

ModelBundle make_synthetic_model(uint64_t seed, const ArchConfig& cfg,
                                 const std::set<int>& planted_noop_sublayers) {
  cfg.validate();
  for (int idx : planted_noop_sublayers) {
    if (idx < 0 || idx >= cfg.n_sublayers())
      throw BadPlantIndex("planted sublayer " + std::to_string(idx) + " outside [0, " +
                          std::to_string(cfg.n_sublayers()) + ")");
  }

  ModelBundle bundle;
  bundle.config = cfg;
  if (cfg.vocab_size >= 259) {
    bundle.tokenizer = Tokenizer::bytes();
  } else {
    std::vector<std::string> pieces(cfg.vocab_size);
    for (int i = 0; i < cfg.vocab_size; ++i) pieces[i] = "<" + std::to_string(i) + ">";
    bundle.tokenizer = Tokenizer::table(std::move(pieces), 1, 2, 0);
  }

  Rng rng(seed);
  const float scale = 1.0f / std::sqrt(static_cast<float>(cfg.d_model));
  for (const auto& spec : architecture_manifest(cfg)) {
    Tensor t;
    t.shape = spec.shape;
    t.data.resize(t.numel());
    const bool is_norm = spec.shape.size() == 1;
    for (float& x : t.data)
      x = is_norm ? 1.0f : static_cast<float>(rng.gaussian()) * scale;
    bundle.tensors.emplace(spec.name, std::move(t));
  }

  for (int idx : planted_noop_sublayers) {
    const std::string p = "blk" + std::to_string(idx / 2) + ".";
    const std::string name = (idx % 2 == 0) ? p + "attn.wo.weight" : p + "mlp.w_out.weight";
    Tensor& t = bundle.tensors.at(name);
    std::fill(t.data.begin(), t.data.end(), 0.0f);
  }
  return bundle;
}

}  // namespace swift
