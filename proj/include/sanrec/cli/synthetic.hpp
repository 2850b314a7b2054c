// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>

#include "sanrec/recsys/dataset.hpp"

namespace sanrec::cli {

/// Interaction data with a planted first-order pattern. Items are 1..items,
/// users 1..users. Each step follows a fixed transition table (one random
/// cycle over all items) with probability `strength`, otherwise jumps to a
/// uniformly drawn item.
struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t items = 50;
  /// Sequence lengths are uniform in [min_len, max_len].
  std::size_t min_len = 5;
  std::size_t max_len = 20;
  double strength = 0.9;
  std::uint64_t seed = 1;

  /// Throws ConfigError: items >= 11, 3 <= min_len <= max_len, strength in [0, 1].
  void validate() const;
};

/// item -> planted successor.
std::map<recsys::ItemId, recsys::ItemId> transition_table(const SyntheticSpec& spec);

recsys::InteractionDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace sanrec::cli
