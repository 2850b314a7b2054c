// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sanrec::sanet {

enum class PlanMode : std::uint8_t { kSymmetricEven = 0, kAsymEvenAll = 1, kAsymEq5Grouped = 2 };

std::string to_string(PlanMode mode);
PlanMode parse_plan_mode(const std::string& s);

/// Which backbone blocks feed the towers. `kept` holds 1-based block
/// indices; layer 0 (the embedding output) is always consumed in addition.
struct LayerDropPlan {
  PlanMode mode = PlanMode::kSymmetricEven;
  std::size_t source_layers = 0;
  std::vector<std::uint16_t> kept;
  /// Group spacing, set for kAsymEq5Grouped only.
  std::size_t group_size = 0;

  std::size_t m() const noexcept { return kept.size(); }
  /// {0} followed by the kept blocks: the layer set a cache must hold.
  std::vector<std::uint16_t> cache_layers() const;
  /// e.g. "asym_eq5_grouped L=24 k=3 {9,12,15,18,21,24}".
  std::string describe() const;
  /// Throws ConfigError if indices are not strictly increasing in [1, L].
  void validate() const;

  bool operator==(const LayerDropPlan&) const = default;
};

/// symmetric_even keeps {2, 4, ..., 2*floor(L_src/2)} and ignores L_image.
/// The asymmetric modes keep m = floor(L_image/2) blocks of the source:
/// asym_even_all at round-half-up(j*L_src/m), bumped upward on collision;
/// asym_eq5_grouped at L_src - (m-j)*k with the largest k such that
/// L_src - k*m >= 1, so the top block is always kept.
LayerDropPlan select_layers(PlanMode mode, std::size_t source_layers, std::size_t image_layers);

/// True when group size k is admissible: source_layers - k*m >= 1.
constexpr bool eq5_admissible(std::size_t source_layers, std::size_t k, std::size_t m) {
  return k * m + 1 <= source_layers;
}

}  // namespace sanrec::sanet
