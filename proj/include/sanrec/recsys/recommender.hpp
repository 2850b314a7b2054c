// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sanrec/ad/parameter.hpp"
#include "sanrec/ad/tape.hpp"
#include "sanrec/backbone/encoder.hpp"
#include "sanrec/recsys/dataset.hpp"
#include "sanrec/recsys/seq_encoder.hpp"
#include "sanrec/regime.hpp"
#include "sanrec/sanet/model.hpp"

namespace sanrec::recsys {

struct RecommenderConfig {
  Regime regime = Regime::kDPEFTCached;
  backbone::EncoderConfig text = backbone::EncoderConfig::text_default();
  backbone::EncoderConfig image = backbone::EncoderConfig::image_default();
  /// Plans and widths must agree with the encoders (see SanConfig::for_encoders).
  sanet::SanConfig san;
  /// seq.d_model must equal san.d_seq.
  SeqConfig seq;
  /// Adapter bottleneck for kEPEFT.
  std::size_t epeft_bottleneck = 16;
  /// Cache files for kDPEFTCached.
  std::filesystem::path text_cache;
  std::filesystem::path image_cache;

  /// Throws ConfigError on inconsistent widths or plans.
  void validate() const;
  /// Hash of every value-affecting field (cache paths excluded).
  std::uint64_t hash() const;
};

/// Item encoder (backbones plus trainable adapters, per regime) and the
/// sequential encoder on top.
///
///   kDPEFTCached    towers read pruned stacks loaded from the cache files.
///   kDPEFTUncached  towers read stacks re-encoded on every call.
///   kFFT            backbones are trainable and run on the tape.
///   kEPEFT          frozen backbones with per-block adapters; a linear head
///                   maps the top pooled [image : text] states to d_seq.
template <typename T>
class Recommender {
 public:
  explicit Recommender(const RecommenderConfig& cfg);
  Recommender(const Recommender&) = delete;
  Recommender& operator=(const Recommender&) = delete;

  const RecommenderConfig& config() const noexcept { return cfg_; }
  Regime regime() const noexcept { return cfg_.regime; }

  backbone::Encoder<T>& text_encoder() { return text_; }
  backbone::Encoder<T>& image_encoder() { return image_; }
  const backbone::Encoder<T>& text_encoder() const { return text_; }
  const backbone::Encoder<T>& image_encoder() const { return image_; }
  /// Null in kEPEFT.
  sanet::SideNetwork<T>* model() { return model_.get(); }
  const sanet::SideNetwork<T>* model() const { return model_.get(); }
  SeqEncoder<T>& seq() { return seq_; }
  const SeqEncoder<T>& seq() const { return seq_; }

  /// Every parameter store: sequence encoder, side towers or adapters and
  /// head, then the two backbones.
  std::vector<ad::ParameterStore<T>*> stores();
  std::vector<const ad::ParameterStore<T>*> stores() const;
  /// Stores whose values change in training (backbones only under kFFT).
  std::vector<ad::ParameterStore<T>*> checkpoint_stores();
  std::vector<const ad::ParameterStore<T>*> checkpoint_stores() const;

  /// n_items x d_seq embeddings of `items` on `tape`.
  ad::Var<T> item_embeddings(ad::Tape<T>& tape, std::span<const ItemId> items) const;

 private:
  const backbone::HiddenStateStack& cached(
      const std::map<ItemId, backbone::HiddenStateStack>& table, ItemId item,
      const char* which) const;

  RecommenderConfig cfg_;
  backbone::Encoder<T> text_;
  backbone::Encoder<T> image_;
  std::unique_ptr<sanet::SideNetwork<T>> model_;
  std::unique_ptr<backbone::EmbeddedAdapters<T>> text_adapters_;
  std::unique_ptr<backbone::EmbeddedAdapters<T>> image_adapters_;
  std::unique_ptr<ad::ParameterStore<T>> epeft_head_;
  SeqEncoder<T> seq_;
  std::map<ItemId, backbone::HiddenStateStack> text_cache_;
  std::map<ItemId, backbone::HiddenStateStack> image_cache_;
};

}  // namespace sanrec::recsys
