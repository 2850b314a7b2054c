// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sanrec/ad/ops.hpp"
#include "sanrec/ad/parameter.hpp"
#include "sanrec/ad/tape.hpp"

namespace sanrec::backbone {

enum class Modality : std::uint8_t { kText = 0, kImage = 1 };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);

/// Number of attention heads in every synthetic encoder block.
inline constexpr std::size_t kEncoderHeads = 2;

struct EncoderConfig {
  Modality modality = Modality::kText;
  std::size_t layers = 12;
  std::size_t hidden = 64;
  /// Token vocabulary (text) or patch codebook size (image).
  std::size_t vocab = 512;
  std::size_t max_positions = 32;
  /// Length of the synthetic content sequence generated per item.
  std::size_t item_tokens = 8;
  std::uint64_t seed = 1;

  /// Throws ConfigError on L < 1, odd or zero H, or empty vocab/positions.
  void validate() const;
  /// 64-bit hash of every field, seed included.
  std::uint64_t fingerprint() const;

  static EncoderConfig text_default();
  static EncoderConfig image_default();
};

/// Pooled per-layer representation of one item from one encoder. Row i of
/// `states` is the pooled output of backbone layer `layers[i]` (0 is the
/// embedding layer). A full stack has layers 0..L; pruned stacks keep a subset.
struct HiddenStateStack {
  std::uint64_t item_id = 0;
  std::uint64_t encoder_fingerprint = 0;
  std::vector<std::uint16_t> layers;
  ad::Tensor<float> states;

  std::size_t depth() const noexcept { return states.rows(); }
  std::size_t hidden() const noexcept { return states.cols(); }
  /// Keeps only the requested layers (must be present, any order given is
  /// normalized to ascending).
  HiddenStateStack pruned(std::span<const std::uint16_t> keep) const;
};

/// Deterministic content for an item: `length` ids below `vocab`, derived
/// from a hash of (modality, item id, position).
std::vector<std::uint32_t> item_content(Modality modality, std::uint64_t item_id,
                                        std::size_t length, std::size_t vocab);

/// Bottleneck adapters inserted after every block (the embedded PEFT
/// arrangement). Up projections start at zero so the backbone output is
/// unchanged at initialization.
template <typename T>
class EmbeddedAdapters {
 public:
  EmbeddedAdapters(const EncoderConfig& cfg, std::size_t bottleneck, std::uint64_t seed,
                   const std::string& prefix);

  ad::ParameterStore<T>& parameters() { return store_; }
  const ad::ParameterStore<T>& parameters() const { return store_; }
  std::size_t bottleneck() const noexcept { return bottleneck_; }

  ad::Var<T> apply(ad::Tape<T>& tape, std::size_t block, ad::Var<T> x) const;

 private:
  struct Slot {
    ad::Parameter<T>* down;
    ad::Parameter<T>* down_bias;
    ad::Parameter<T>* up;
    ad::Parameter<T>* up_bias;
  };
  ad::ParameterStore<T> store_;
  std::vector<Slot> slots_;
  std::size_t bottleneck_;
};

/// Seeded stand-in for a pretrained transformer encoder: token + position
/// embeddings followed by L pre-norm blocks (2-head bidirectional attention,
/// 4H GELU MLP). Weights are drawn N(0, 1) / sqrt(H); biases and offsets are
/// zero, layernorm gains one. Parameters are frozen unless unfreeze() is
/// called (full fine-tuning).
template <typename T>
class Encoder {
 public:
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

  /// `prefix` names the parameters, e.g. "backbone.text".
  explicit Encoder(const EncoderConfig& cfg, const std::string& prefix = "");
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;
  Encoder(Encoder&&) noexcept = default;

  const EncoderConfig& config() const noexcept { return cfg_; }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  const std::string& prefix() const noexcept { return prefix_; }

  ad::ParameterStore<T>& parameters() { return store_; }
  const ad::ParameterStore<T>& parameters() const { return store_; }
  void unfreeze() { store_.set_trainable(true); }
  void freeze() { store_.set_trainable(false); }

  const Block& block(std::size_t i) const { return blocks_.at(i); }
  const ad::Parameter<T>& token_embedding() const { return *token_embedding_; }
  const ad::Parameter<T>& position_embedding() const { return *position_embedding_; }

  /// Runs the encoder on `tape` and returns L+1 pooled 1 x H states (index 0
  /// is the embedding output). Nodes are tagged "backbone". Optional adapters
  /// are applied after every block.
  std::vector<ad::Var<T>> forward(ad::Tape<T>& tape, std::span<const std::uint32_t> tokens,
                                  const EmbeddedAdapters<T>* adapters = nullptr) const;

  /// Value-only evaluation of forward().
  HiddenStateStack encode_item(std::uint64_t item_id, std::span<const std::uint32_t> tokens) const;
  /// encode_item on the item's synthetic content.
  HiddenStateStack encode_item(std::uint64_t item_id) const;

  std::vector<std::uint32_t> content(std::uint64_t item_id) const {
    return item_content(cfg_.modality, item_id, cfg_.item_tokens, cfg_.vocab);
  }

 private:
  void check_tokens(std::span<const std::uint32_t> tokens) const;

  EncoderConfig cfg_;
  std::uint64_t fingerprint_;
  std::string prefix_;
  ad::ParameterStore<T> store_;
  ad::Parameter<T>* token_embedding_ = nullptr;
  ad::Parameter<T>* position_embedding_ = nullptr;
  std::vector<Block> blocks_;
};

/// Reads stacks exported in the cache file format, in file order. The
/// fingerprint of every stack is taken from the file header.
std::vector<HiddenStateStack> import_hidden_states(const std::filesystem::path& path);

}  // namespace sanrec::backbone
