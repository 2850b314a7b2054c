// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/seq_encoder.hpp"

#include <cmath>

#include "sanrec/error.hpp"

namespace sanrec::recsys {

void SeqConfig::validate() const {
  if (d_model < 1 || heads < 1 || d_model % heads != 0) {
    throw ConfigError("sequence encoder: d_model must be a positive multiple of heads");
  }
  if (blocks < 1) throw ConfigError("sequence encoder: need at least one block");
  if (max_len < 1) throw ConfigError("sequence encoder: max_seq_len must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

namespace {

template <typename T>
ad::Tensor<T> seeded(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.data()) v = static_cast<T>(static_cast<float>(rng.normal() * s));
  return t;
}

}  // namespace

template <typename T>
SeqEncoder<T>::SeqEncoder(const SeqConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix64(cfg_.seed, fnv1a("seq")));
  const std::size_t d = cfg_.d_model;
  position_ = &store_.add("seq.position", seeded<T>(rng, cfg_.max_len, d, d));
  for (std::size_t b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "seq.block" + std::to_string(b) + ".";
    Block blk;
    blk.ln1_gain = &store_.add(p + "ln1_gain", ad::Tensor<T>(1, d, T(1)));
    blk.ln1_offset = &store_.add(p + "ln1_offset", ad::Tensor<T>(1, d));
    blk.wq = &store_.add(p + "wq", seeded<T>(rng, d, d, d));
    blk.bq = &store_.add(p + "bq", ad::Tensor<T>(1, d));
    blk.wk = &store_.add(p + "wk", seeded<T>(rng, d, d, d));
    blk.bk = &store_.add(p + "bk", ad::Tensor<T>(1, d));
    blk.wv = &store_.add(p + "wv", seeded<T>(rng, d, d, d));
    blk.bv = &store_.add(p + "bv", ad::Tensor<T>(1, d));
    blk.wo = &store_.add(p + "wo", seeded<T>(rng, d, d, d));
    blk.bo = &store_.add(p + "bo", ad::Tensor<T>(1, d));
    blk.ln2_gain = &store_.add(p + "ln2_gain", ad::Tensor<T>(1, d, T(1)));
    blk.ln2_offset = &store_.add(p + "ln2_offset", ad::Tensor<T>(1, d));
    blk.w1 = &store_.add(p + "w1", seeded<T>(rng, d, 4 * d, d));
    blk.b1 = &store_.add(p + "b1", ad::Tensor<T>(1, 4 * d));
    blk.w2 = &store_.add(p + "w2", seeded<T>(rng, 4 * d, d, 4 * d));
    blk.b2 = &store_.add(p + "b2", ad::Tensor<T>(1, d));
    blocks_.push_back(blk);
  }
  final_gain_ = &store_.add("seq.final_gain", ad::Tensor<T>(1, d, T(1)));
  final_offset_ = &store_.add("seq.final_offset", ad::Tensor<T>(1, d));
}

template <typename T>
ad::Var<T> SeqEncoder<T>::forward(ad::Tape<T>& tape, ad::Var<T> items, Rng* dropout_rng) const {
  const std::size_t len = items.shape().rows;
  const std::size_t d = cfg_.d_model;
  if (len == 0) throw InputError("sequence encoder: empty sequence");
  if (len > cfg_.max_len) {
    throw ContractError("sequence encoder: " + std::to_string(len) + " items exceed max_seq_len " +
                        std::to_string(cfg_.max_len) + "; truncate first");
  }
  if (items.shape().cols != d) {
    throw DimensionError("sequence encoder: item width " + std::to_string(items.shape().cols) +
                         " != d_model " + std::to_string(d));
  }
  auto drop = [&](ad::Var<T> x) {
    return dropout_rng != nullptr ? ad::dropout(x, cfg_.dropout, *dropout_rng) : x;
  };
  auto p = [&](ad::Parameter<T>* param) { return tape.param(*param); };
  const std::size_t head_dim = d / cfg_.heads;
  const T attn_scale = T(1) / std::sqrt(static_cast<T>(head_dim));

  auto x = drop(ad::add(items, ad::slice_rows(p(position_), 0, len)));
  for (const Block& blk : blocks_) {
    auto h = ad::layernorm(x, p(blk.ln1_gain), p(blk.ln1_offset));
    auto q = ad::linear(h, p(blk.wq), p(blk.bq));
    auto k = ad::linear(h, p(blk.wk), p(blk.bk));
    auto v = ad::linear(h, p(blk.wv), p(blk.bv));
    std::vector<ad::Var<T>> heads;
    for (std::size_t hd = 0; hd < cfg_.heads; ++hd) {
      auto qh = ad::slice_cols(q, hd * head_dim, head_dim);
      auto kh = ad::slice_cols(k, hd * head_dim, head_dim);
      auto vh = ad::slice_cols(v, hd * head_dim, head_dim);
      auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), attn_scale);
      heads.push_back(ad::matmul(ad::softmax_rows(scores, true), vh));
    }
    auto attn = heads.size() == 1 ? heads[0] : ad::concat_cols(heads);
    x = ad::add(x, drop(ad::linear(attn, p(blk.wo), p(blk.bo))));
    auto h2 = ad::layernorm(x, p(blk.ln2_gain), p(blk.ln2_offset));
    auto ff = ad::linear(ad::gelu(ad::linear(h2, p(blk.w1), p(blk.b1))), p(blk.w2), p(blk.b2));
    x = ad::add(x, drop(ff));
  }
  return ad::layernorm(x, p(final_gain_), p(final_offset_));
}

template <typename T>
ad::Var<T> SeqEncoder<T>::user_state(ad::Tape<T>& tape, ad::Var<T> items, Rng* dropout_rng) const {
  auto out = forward(tape, items, dropout_rng);
  return ad::slice_rows(out, out.shape().rows - 1, 1);
}

double score(std::span<const double> user_state, std::span<const double> item) {
  if (user_state.size() != item.size()) {
    throw DimensionError("score: user state has " + std::to_string(user_state.size()) +
                         " entries, item " + std::to_string(item.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < item.size(); ++i) s += user_state[i] * item[i];
  return s;
}

template class SeqEncoder<float>;
template class SeqEncoder<double>;

}  // namespace sanrec::recsys
