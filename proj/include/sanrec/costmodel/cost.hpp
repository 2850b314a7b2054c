// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Per-step training cost by regime. FLOPs count matrix products only, at
// 2mkn per (m x k)(k x n) product, which is exactly what the tape's
// matmul counter records. Per encoder block on s tokens of width H:
//
//   q, k, v, o projections   8sH^2
//   scores and mixing        4s^2H   (all heads together)
//   4H GELU feed-forward     16sH^2
//   total  F_blk = 24sH^2 + 4s^2H
//
// Backward costs 2x forward for a trainable segment (input and weight
// gradients) and 1x for a frozen segment the gradient must cross (input
// gradients only).
//
// Activation bytes are 4 bytes times the widths each op keeps for its own
// backward, per token for encoder blocks and per item for side towers:
//
//   trainable linear      its input
//   frozen linear         nothing (dX = dY W^T needs no input)
//   layernorm, gelu       their input
//   q k^T, p v            q, k, v, and the per-head softmax rows (2s)
//   gate mixing           both mixed operands
//
// The sequential encoder is identical in every regime and left out.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sanrec/ad/parameter.hpp"
#include "sanrec/backbone/encoder.hpp"
#include "sanrec/regime.hpp"
#include "sanrec/sanet/model.hpp"

namespace sanrec::costmodel {

struct Workload {
  backbone::EncoderConfig text = backbone::EncoderConfig::text_default();
  backbone::EncoderConfig image = backbone::EncoderConfig::image_default();
  sanet::SanConfig san;
  /// Items embedded per step.
  std::uint64_t batch = 32;
  /// Tokens per item; 0 means the encoder's item_tokens.
  std::uint64_t text_seq = 0;
  std::uint64_t image_seq = 0;
  std::uint64_t epeft_bottleneck = 16;
  /// Items in the hidden-state cache.
  std::uint64_t cache_items = 1000;

  std::uint64_t text_tokens() const { return text_seq ? text_seq : text.item_tokens; }
  std::uint64_t image_tokens() const { return image_seq ? image_seq : image.item_tokens; }
  /// Identity of everything except the regime; compare() requires equality.
  std::uint64_t hash() const;
};

struct CostReport {
  Regime regime = Regime::kDPEFTCached;
  std::uint64_t workload = 0;
  std::uint64_t fwd_backbone_flops = 0;
  std::uint64_t fwd_peft_flops = 0;
  std::uint64_t bwd_flops = 0;
  std::uint64_t activation_bytes = 0;
  std::uint64_t trainable_params = 0;
  std::uint64_t cache_bytes = 0;

  /// `COST regime=<r> fwdB=<n> fwdP=<n> bwd=<n> act=<n> params=<n> cache=<n>`
  std::string line() const;
};

/// Matmul FLOPs of one encoder block on s tokens.
std::uint64_t block_flops(std::uint64_t s, std::uint64_t hidden);
/// Matmul FLOPs of one full encoder forward for a single item.
std::uint64_t encoder_flops(const backbone::EncoderConfig& cfg, std::uint64_t s);
/// Matmul FLOPs of item_embed for a single item.
std::uint64_t tower_flops(const sanet::SanConfig& san);
/// Parameter counts matching the library's parameter stores.
std::uint64_t encoder_params(const backbone::EncoderConfig& cfg);
std::uint64_t tower_params(const sanet::SanConfig& san);
std::uint64_t adapter_params(const backbone::EncoderConfig& cfg, std::uint64_t bottleneck);

CostReport estimate(const Workload& w, Regime regime);

/// Name prefixes of the parameter groups estimate() charges weight
/// gradients to under `regime`.
std::vector<std::string> gradient_groups(Regime regime);

/// Parameters of `stores` in the groups above: the set a gradient probe
/// must report for the regime.
template <typename T>
std::set<std::string> expected_gradient_set(const std::vector<const ad::ParameterStore<T>*>& stores,
                                            Regime regime) {
  std::set<std::string> out;
  const auto groups = gradient_groups(regime);
  for (const auto* s : stores) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      const auto& name = (*s)[i].name;
      for (const auto& g : groups) {
        if (name.starts_with(g)) out.insert(name);
      }
    }
  }
  return out;
}

struct ProbeResult {
  Regime regime = Regime::kDPEFTCached;
  /// Parameters with a gradient after the step, sequential encoder excluded.
  std::set<std::string> with_gradients;
  /// Backbone nodes kept on the tape for backward.
  std::size_t backbone_nodes_retained = 0;

  bool backbone_activations_retained() const { return backbone_nodes_retained > 0; }
  bool any_backbone_gradient() const;
};

/// ProbeResult from one training step's reached set, dropping "seq." names.
ProbeResult make_probe(Regime regime, const std::set<std::string>& reached,
                       std::size_t backbone_nodes_retained);

struct Comparison {
  std::vector<CostReport> reports;
  /// False when fewer than two reports were given.
  bool has_verdict = false;
  bool pass = false;
  std::vector<std::string> failures;

  /// Human-readable table with per-column orderings and the verdict.
  std::string table() const;
};

/// Checks DPEFT_CACHED <= DPEFT_UNCACHED <= EPEFT_ADAPTER <= FFT on
/// activation bytes and backward FLOPs for the regimes present. Throws
/// ContractError when reports come from different workloads.
Comparison compare(const std::vector<CostReport>& reports);

}  // namespace sanrec::costmodel
