// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/sanet/layerdrop.hpp"

#include "sanrec/error.hpp"

namespace sanrec::sanet {

std::string to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::kSymmetricEven: return "symmetric_even";
    case PlanMode::kAsymEvenAll: return "asym_even_all";
    case PlanMode::kAsymEq5Grouped: return "asym_eq5_grouped";
  }
  return "unknown";
}

PlanMode parse_plan_mode(const std::string& s) {
  if (s == "symmetric_even") return PlanMode::kSymmetricEven;
  if (s == "asym_even_all") return PlanMode::kAsymEvenAll;
  if (s == "asym_eq5_grouped") return PlanMode::kAsymEq5Grouped;
  throw ConfigError("unknown layer plan '" + s +
                    "' (expected symmetric_even, asym_even_all or asym_eq5_grouped)");
}

std::vector<std::uint16_t> LayerDropPlan::cache_layers() const {
  std::vector<std::uint16_t> layers{0};
  layers.insert(layers.end(), kept.begin(), kept.end());
  return layers;
}

std::string LayerDropPlan::describe() const {
  std::string s = to_string(mode) + " L=" + std::to_string(source_layers);
  if (mode == PlanMode::kAsymEq5Grouped) s += " k=" + std::to_string(group_size);
  s += " {";
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(kept[i]);
  }
  return s + "}";
}

void LayerDropPlan::validate() const {
  if (kept.empty()) throw ConfigError("layer plan keeps no blocks");
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 1 || kept[i] > source_layers) {
      throw ConfigError("layer plan index " + std::to_string(kept[i]) + " outside [1, " +
                        std::to_string(source_layers) + "]");
    }
    if (i > 0 && kept[i] <= kept[i - 1]) {
      throw ConfigError("layer plan indices must be strictly increasing");
    }
  }
}

LayerDropPlan select_layers(PlanMode mode, std::size_t source_layers, std::size_t image_layers) {
  if (source_layers < 2) {
    throw ConfigError("layer plan needs at least 2 source layers, got " +
                      std::to_string(source_layers));
  }
  LayerDropPlan plan;
  plan.mode = mode;
  plan.source_layers = source_layers;

  if (mode == PlanMode::kSymmetricEven) {
    for (std::size_t i = 2; i <= source_layers; i += 2) {
      plan.kept.push_back(static_cast<std::uint16_t>(i));
    }
    return plan;
  }

  const std::size_t m = image_layers / 2;
  if (m < 1) {
    throw ConfigError("asymmetric plan needs an image encoder with at least 2 layers");
  }
  if (source_layers < m) {
    throw ConfigError("cannot keep " + std::to_string(m) + " blocks of a " +
                      std::to_string(source_layers) + "-layer encoder");
  }

  if (mode == PlanMode::kAsymEvenAll) {
    std::size_t prev = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t idx = (2 * j * source_layers + m) / (2 * m);
      if (idx <= prev) idx = prev + 1;
      plan.kept.push_back(static_cast<std::uint16_t>(idx));
      prev = idx;
    }
  } else {
    const std::size_t k = (source_layers - 1) / m;
    if (k < 1) {
      throw ConfigError("no group size k >= 1 satisfies L - k*m >= 1 for L=" +
                        std::to_string(source_layers) + ", m=" + std::to_string(m));
    }
    plan.group_size = k;
    for (std::size_t j = 1; j <= m; ++j) {
      plan.kept.push_back(static_cast<std::uint16_t>(source_layers - (m - j) * k));
    }
  }
  plan.validate();
  return plan;
}

}  // namespace sanrec::sanet
