// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/backbone/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "sanrec/cache/cache.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::backbone {

std::string to_string(Modality m) { return m == Modality::kText ? "text" : "image"; }

Modality parse_modality(const std::string& s) {
  if (s == "text") return Modality::kText;
  if (s == "image") return Modality::kImage;
  throw ConfigError("unknown modality '" + s + "' (expected text or image)");
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder layers must be >= 1");
  if (hidden < 2 || hidden % 2 != 0) {
    throw ConfigError("encoder hidden dim must be even and >= 2, got " + std::to_string(hidden));
  }
  if (vocab < 1) throw ConfigError("encoder vocab must be positive");
  if (max_positions < 1) throw ConfigError("encoder max_positions must be positive");
  if (item_tokens < 1 || item_tokens > max_positions) {
    throw ConfigError("encoder item_tokens must be in [1, max_positions]");
  }
  if (layers > 0xFFFE) throw ConfigError("encoder layers exceed the cache format limit");
}

std::uint64_t EncoderConfig::fingerprint() const {
  std::uint64_t h = mix64(0x53414E5245432D45ULL, static_cast<std::uint64_t>(modality));
  for (std::uint64_t v : {std::uint64_t(layers), std::uint64_t(hidden), std::uint64_t(vocab),
                          std::uint64_t(max_positions), std::uint64_t(item_tokens), seed}) {
    h = mix64(h, v);
  }
  return h;
}

EncoderConfig EncoderConfig::text_default() {
  return EncoderConfig{Modality::kText, 12, 64, 512, 32, 8, 11};
}

EncoderConfig EncoderConfig::image_default() {
  return EncoderConfig{Modality::kImage, 12, 64, 256, 32, 16, 23};
}

HiddenStateStack HiddenStateStack::pruned(std::span<const std::uint16_t> keep) const {
  std::vector<std::uint16_t> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  HiddenStateStack out;
  out.item_id = item_id;
  out.encoder_fingerprint = encoder_fingerprint;
  out.layers = sorted;
  out.states = ad::Tensor<float>(sorted.size(), hidden());
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    auto it = std::find(layers.begin(), layers.end(), sorted[r]);
    if (it == layers.end()) {
      throw ConfigError("layer " + std::to_string(sorted[r]) + " not present in stack");
    }
    const auto src = states.row(static_cast<std::size_t>(it - layers.begin()));
    std::copy(src.begin(), src.end(), out.states.row(r).begin());
  }
  return out;
}

std::vector<std::uint32_t> item_content(Modality modality, std::uint64_t item_id,
                                        std::size_t length, std::size_t vocab) {
  std::vector<std::uint32_t> tokens(length);
  const std::uint64_t base = mix64(0xC0DE0000ULL + static_cast<std::uint64_t>(modality), item_id);
  for (std::size_t i = 0; i < length; ++i) {
    tokens[i] = static_cast<std::uint32_t>(mix64(base, i) % vocab);
  }
  return tokens;
}

namespace {

// Draws in float first so float and double instances hold identical values.
template <typename T>
ad::Tensor<T> seeded_normal(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.data()) v = static_cast<T>(static_cast<float>(rng.normal() * scale));
  return t;
}

}  // namespace

template <typename T>
EmbeddedAdapters<T>::EmbeddedAdapters(const EncoderConfig& cfg, std::size_t bottleneck,
                                      std::uint64_t seed, const std::string& prefix)
    : bottleneck_(bottleneck) {
  cfg.validate();
  if (bottleneck < 1) throw ConfigError("adapter bottleneck must be >= 1");
  Rng rng(mix64(seed, cfg.fingerprint()));
  const std::size_t h = cfg.hidden;
  const double s = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t b = 0; b < cfg.layers; ++b) {
    const std::string p = prefix + ".block" + std::to_string(b);
    Slot slot;
    slot.down = &store_.add(p + ".down", seeded_normal<T>(rng, h, bottleneck, s));
    slot.down_bias = &store_.add(p + ".down_bias", ad::Tensor<T>(1, bottleneck));
    slot.up = &store_.add(p + ".up", ad::Tensor<T>(bottleneck, h));
    slot.up_bias = &store_.add(p + ".up_bias", ad::Tensor<T>(1, h));
    slots_.push_back(slot);
  }
}

template <typename T>
ad::Var<T> EmbeddedAdapters<T>::apply(ad::Tape<T>& tape, std::size_t block, ad::Var<T> x) const {
  const Slot& s = slots_.at(block);
  auto hidden = ad::gelu(ad::linear(x, tape.param(*s.down), tape.param(*s.down_bias)));
  return ad::add(x, ad::linear(hidden, tape.param(*s.up), tape.param(*s.up_bias)));
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, const std::string& prefix)
    : cfg_(cfg), fingerprint_(cfg.fingerprint()), prefix_(prefix) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const std::size_t h = cfg_.hidden;
  const double s = 1.0 / std::sqrt(static_cast<double>(h));
  auto name = [&](const std::string& n) { return prefix_.empty() ? n : prefix_ + "." + n; };
  auto ones = [&] { return ad::Tensor<T>(1, h, T(1)); };
  auto zeros = [&](std::size_t n) { return ad::Tensor<T>(1, n); };

  token_embedding_ = &store_.add(name("token_embedding"),
                                 seeded_normal<T>(rng, cfg_.vocab, h, s), false);
  position_embedding_ = &store_.add(name("position_embedding"),
                                    seeded_normal<T>(rng, cfg_.max_positions, h, s), false);
  for (std::size_t b = 0; b < cfg_.layers; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    Block blk;
    blk.ln1_gain = &store_.add(name(p + "ln1_gain"), ones(), false);
    blk.ln1_offset = &store_.add(name(p + "ln1_offset"), zeros(h), false);
    blk.wq = &store_.add(name(p + "wq"), seeded_normal<T>(rng, h, h, s), false);
    blk.bq = &store_.add(name(p + "bq"), zeros(h), false);
    blk.wk = &store_.add(name(p + "wk"), seeded_normal<T>(rng, h, h, s), false);
    blk.bk = &store_.add(name(p + "bk"), zeros(h), false);
    blk.wv = &store_.add(name(p + "wv"), seeded_normal<T>(rng, h, h, s), false);
    blk.bv = &store_.add(name(p + "bv"), zeros(h), false);
    blk.wo = &store_.add(name(p + "wo"), seeded_normal<T>(rng, h, h, s), false);
    blk.bo = &store_.add(name(p + "bo"), zeros(h), false);
    blk.ln2_gain = &store_.add(name(p + "ln2_gain"), ones(), false);
    blk.ln2_offset = &store_.add(name(p + "ln2_offset"), zeros(h), false);
    blk.w1 = &store_.add(name(p + "w1"), seeded_normal<T>(rng, h, 4 * h, s), false);
    blk.b1 = &store_.add(name(p + "b1"), zeros(4 * h), false);
    blk.w2 = &store_.add(name(p + "w2"), seeded_normal<T>(rng, 4 * h, h, s), false);
    blk.b2 = &store_.add(name(p + "b2"), zeros(h), false);
    blocks_.push_back(blk);
  }
}

template <typename T>
void Encoder<T>::check_tokens(std::span<const std::uint32_t> tokens) const {
  if (tokens.empty()) throw InputError("encode: empty token sequence");
  if (tokens.size() > cfg_.max_positions) {
    throw InputError("encode: " + std::to_string(tokens.size()) + " tokens exceed max_positions " +
                     std::to_string(cfg_.max_positions));
  }
  for (auto t : tokens) {
    if (t >= cfg_.vocab) {
      throw InputError("encode: token id " + std::to_string(t) + " out of range (vocab " +
                       std::to_string(cfg_.vocab) + ")");
    }
  }
}

template <typename T>
std::vector<ad::Var<T>> Encoder<T>::forward(ad::Tape<T>& tape,
                                            std::span<const std::uint32_t> tokens,
                                            const EmbeddedAdapters<T>* adapters) const {
  check_tokens(tokens);
  typename ad::Tape<T>::TagScope scope(tape, "backbone");
  const std::size_t seq = tokens.size();
  const std::size_t h = cfg_.hidden;
  const std::size_t head_dim = h / kEncoderHeads;
  const T attn_scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  std::vector<std::size_t> ids(tokens.begin(), tokens.end());
  std::vector<std::size_t> positions(seq);
  for (std::size_t i = 0; i < seq; ++i) positions[i] = i;
  auto x = ad::add(ad::gather_rows(tape.param(*token_embedding_), std::span<const std::size_t>(ids)),
                   ad::gather_rows(tape.param(*position_embedding_),
                                   std::span<const std::size_t>(positions)));

  std::vector<ad::Var<T>> pooled;
  pooled.reserve(cfg_.layers + 1);
  pooled.push_back(ad::slice_rows(x, 0, 1));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    auto p = [&](ad::Parameter<T>* param) { return tape.param(*param); };
    auto hnorm = ad::layernorm(x, p(blk.ln1_gain), p(blk.ln1_offset));
    auto q = ad::linear(hnorm, p(blk.wq), p(blk.bq));
    auto k = ad::linear(hnorm, p(blk.wk), p(blk.bk));
    auto v = ad::linear(hnorm, p(blk.wv), p(blk.bv));
    std::vector<ad::Var<T>> heads;
    for (std::size_t hd = 0; hd < kEncoderHeads; ++hd) {
      auto qh = ad::slice_cols(q, hd * head_dim, head_dim);
      auto kh = ad::slice_cols(k, hd * head_dim, head_dim);
      auto vh = ad::slice_cols(v, hd * head_dim, head_dim);
      auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), attn_scale);
      heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    x = ad::add(x, ad::linear(ad::concat_cols(heads), p(blk.wo), p(blk.bo)));
    auto h2 = ad::layernorm(x, p(blk.ln2_gain), p(blk.ln2_offset));
    auto mlp = ad::linear(ad::gelu(ad::linear(h2, p(blk.w1), p(blk.b1))), p(blk.w2), p(blk.b2));
    x = ad::add(x, mlp);
    if (adapters != nullptr) x = adapters->apply(tape, b, x);
    pooled.push_back(ad::slice_rows(x, 0, 1));
  }
  return pooled;
}

template <typename T>
HiddenStateStack Encoder<T>::encode_item(std::uint64_t item_id,
                                         std::span<const std::uint32_t> tokens) const {
  ad::Tape<T> tape(ad::GradMode::kDisabled);
  auto pooled = forward(tape, tokens);
  HiddenStateStack stack;
  stack.item_id = item_id;
  stack.encoder_fingerprint = fingerprint_;
  stack.states = ad::Tensor<float>(pooled.size(), cfg_.hidden);
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    stack.layers.push_back(static_cast<std::uint16_t>(i));
    const auto& v = pooled[i].value();
    for (std::size_t j = 0; j < cfg_.hidden; ++j) stack.states(i, j) = static_cast<float>(v[j]);
  }
  return stack;
}

template <typename T>
HiddenStateStack Encoder<T>::encode_item(std::uint64_t item_id) const {
  const auto tokens = content(item_id);
  return encode_item(item_id, tokens);
}

std::vector<HiddenStateStack> import_hidden_states(const std::filesystem::path& path) {
  cache::CacheReader reader(path);
  std::vector<HiddenStateStack> out;
  out.reserve(reader.header().item_count);
  for (std::size_t i = 0; i < reader.header().item_count; ++i) out.push_back(reader.read_at(i));
  return out;
}

template class EmbeddedAdapters<float>;
template class EmbeddedAdapters<double>;
template class Encoder<float>;
template class Encoder<double>;

}  // namespace sanrec::backbone
