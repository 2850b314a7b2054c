// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sanrec/ad/ops.hpp"
#include "sanrec/ad/parameter.hpp"
#include "sanrec/ad/tape.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::recsys {

struct SeqConfig {
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t max_len = 10;
  double dropout = 0.1;
  std::uint64_t seed = 13;

  void validate() const;
};

/// Causal pre-norm transformer over a user's item embeddings: learned
/// position embeddings, `blocks` blocks of masked multi-head attention and a
/// 4D GELU feed-forward, then a final layernorm. Parameters are named
/// "seq.*".
template <typename T>
class SeqEncoder {
 public:
  explicit SeqEncoder(const SeqConfig& cfg);
  SeqEncoder(const SeqEncoder&) = delete;
  SeqEncoder& operator=(const SeqEncoder&) = delete;
  SeqEncoder(SeqEncoder&&) noexcept = default;

  const SeqConfig& config() const noexcept { return cfg_; }
  ad::ParameterStore<T>& parameters() { return store_; }
  const ad::ParameterStore<T>& parameters() const { return store_; }

  /// `items` is len x d_model with 1 <= len <= max_len. Dropout is applied
  /// only when `dropout_rng` is given. Returns len x d_model; row t depends
  /// on rows 0..t only.
  ad::Var<T> forward(ad::Tape<T>& tape, ad::Var<T> items, Rng* dropout_rng = nullptr) const;
  /// Last row of forward(): the user state.
  ad::Var<T> user_state(ad::Tape<T>& tape, ad::Var<T> items, Rng* dropout_rng = nullptr) const;

 private:
  struct Block {
    ad::Parameter<T>* ln1_gain;
    ad::Parameter<T>* ln1_offset;
    ad::Parameter<T>* wq;
    ad::Parameter<T>* bq;
    ad::Parameter<T>* wk;
    ad::Parameter<T>* bk;
    ad::Parameter<T>* wv;
    ad::Parameter<T>* bv;
    ad::Parameter<T>* wo;
    ad::Parameter<T>* bo;
    ad::Parameter<T>* ln2_gain;
    ad::Parameter<T>* ln2_offset;
    ad::Parameter<T>* w1;
    ad::Parameter<T>* b1;
    ad::Parameter<T>* w2;
    ad::Parameter<T>* b2;
  };

  SeqConfig cfg_;
  ad::ParameterStore<T> store_;
  ad::Parameter<T>* position_ = nullptr;
  std::vector<Block> blocks_;
  ad::Parameter<T>* final_gain_ = nullptr;
  ad::Parameter<T>* final_offset_ = nullptr;
};

/// Keeps the last `max_len` entries.
template <typename V>
std::span<const V> truncate_left(std::span<const V> seq, std::size_t max_len) {
  return seq.size() <= max_len ? seq : seq.subspan(seq.size() - max_len);
}

/// Dot product; throws DimensionError on length mismatch.
double score(std::span<const double> user_state, std::span<const double> item);

}  // namespace sanrec::recsys
