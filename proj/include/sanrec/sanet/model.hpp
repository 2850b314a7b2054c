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
#include "sanrec/backbone/encoder.hpp"
#include "sanrec/sanet/layerdrop.hpp"

namespace sanrec::sanet {

/// VS pairs encoders of equal width; VA inserts a text -> image dimension
/// transform in front of the inter-modal tower.
enum class Variant : std::uint8_t { kVS = 0, kVA = 1 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct SanConfig {
  Variant variant = Variant::kVA;
  std::size_t text_hidden = 64;
  std::size_t image_hidden = 64;
  LayerDropPlan text_plan;
  LayerDropPlan image_plan;
  std::size_t bottleneck = 16;
  std::size_t d_seq = 64;
  std::uint64_t seed = 7;

  /// Throws ConfigError: plans must share m, VS needs equal widths.
  void validate() const;
  std::uint64_t hash() const;
  std::size_t m() const noexcept { return image_plan.m(); }
  /// Width of the fusion layer input [e_image : e_inter : e_text].
  std::size_t fusion_width() const noexcept { return 2 * image_hidden + text_hidden; }

  /// Image plan is always symmetric_even. VS uses symmetric_even for text as
  /// well; VA uses `asym_mode`.
  static SanConfig for_encoders(Variant variant, const backbone::EncoderConfig& text,
                                const backbone::EncoderConfig& image,
                                PlanMode asym_mode = PlanMode::kAsymEvenAll);
};

/// Residual bottleneck: y = x + up(gelu(down(x))).
template <typename T>
struct SanBlock {
  ad::Parameter<T>* down = nullptr;
  ad::Parameter<T>* down_bias = nullptr;
  ad::Parameter<T>* up = nullptr;
  ad::Parameter<T>* up_bias = nullptr;

  ad::Var<T> forward(ad::Tape<T>& tape, ad::Var<T> x) const;
};

/// Scalar mixing weight sigmoid(raw).
template <typename T>
struct Gate {
  ad::Parameter<T>* raw = nullptr;

  ad::Var<T> value(ad::Tape<T>& tape) const { return ad::sigmoid(tape.param(*raw)); }
  T current() const { return ad::sigmoid_value(raw->value[0]); }
};

template <typename T>
struct Tower {
  std::vector<SanBlock<T>> blocks;
  /// Intra towers: gates[i] mixes into block i+2 (1-based). Inter tower:
  /// gates[i] belongs to block i+1.
  std::vector<Gate<T>> gates;
};

/// Per-layer inputs of a tower: entry 0 is the embedding output, entries
/// 1..m the kept blocks; each entry is n_items x H.
template <typename T>
using Entries = std::vector<ad::Var<T>>;

/// The three adapter towers plus the dimension transform and fusion layer.
/// Parameter names: intra_text.*, intra_image.*, inter.*, dtl.*, fusion.*.
template <typename T>
class SideNetwork {
 public:
  explicit SideNetwork(const SanConfig& cfg);
  SideNetwork(const SideNetwork&) = delete;
  SideNetwork& operator=(const SideNetwork&) = delete;
  SideNetwork(SideNetwork&&) noexcept = default;

  const SanConfig& config() const noexcept { return cfg_; }
  ad::ParameterStore<T>& parameters() { return store_; }
  const ad::ParameterStore<T>& parameters() const { return store_; }

  const Tower<T>& intra_text_tower() const { return intra_text_; }
  const Tower<T>& intra_image_tower() const { return intra_image_; }
  const Tower<T>& inter_tower() const { return inter_; }
  bool has_dtl() const noexcept { return dtl_weight_ != nullptr; }

  ad::Var<T> intra_text(ad::Tape<T>& tape, const Entries<T>& text) const;
  ad::Var<T> intra_image(ad::Tape<T>& tape, const Entries<T>& image) const;
  ad::Var<T> inter(ad::Tape<T>& tape, const Entries<T>& text, const Entries<T>& image) const;
  /// n_items x d_seq item embeddings.
  ad::Var<T> item_embed(ad::Tape<T>& tape, const Entries<T>& text, const Entries<T>& image) const;

  /// Applies the dimension transform (identity for VS).
  ad::Var<T> transform_text(ad::Tape<T>& tape, ad::Var<T> text_state) const;

 private:
  ad::Var<T> run_intra(ad::Tape<T>& tape, const Tower<T>& tower, const Entries<T>& entries,
                       const char* what) const;

  SanConfig cfg_;
  ad::ParameterStore<T> store_;
  Tower<T> intra_text_;
  Tower<T> intra_image_;
  Tower<T> inter_;
  ad::Parameter<T>* dtl_weight_ = nullptr;
  ad::Parameter<T>* dtl_bias_ = nullptr;
  ad::Parameter<T>* fusion_weight_ = nullptr;
  ad::Parameter<T>* fusion_bias_ = nullptr;
};

/// Stacks one constant per layer in `layers` from per-item stacks (full or
/// pruned; each must contain every requested layer, else ContractError).
template <typename T>
Entries<T> stack_entries(ad::Tape<T>& tape, std::span<const backbone::HiddenStateStack* const> items,
                         std::span<const std::uint16_t> layers);

/// Same, from per-item encoder outputs still on the tape (full fine-tuning):
/// `pooled[i][l]` is item i's 1 x H state of layer l.
template <typename T>
Entries<T> stack_entries(const std::vector<std::vector<ad::Var<T>>>& pooled,
                         std::span<const std::uint16_t> layers);

}  // namespace sanrec::sanet
