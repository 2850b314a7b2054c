// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "sanrec/error.hpp"

namespace sanrec {

/// How the backbone takes part in training.
///   kFFT            backbone unfrozen, full forward and backward.
///   kEPEFT          adapters inside frozen blocks; backward crosses the backbone.
///   kDPEFTUncached  side towers on hidden states recomputed every step.
///   kDPEFTCached    side towers on hidden states read from the cache.
enum class Regime { kFFT, kEPEFT, kDPEFTUncached, kDPEFTCached };

inline constexpr std::array<Regime, 4> kAllRegimes = {Regime::kFFT, Regime::kEPEFT,
                                                      Regime::kDPEFTUncached, Regime::kDPEFTCached};

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::kFFT: return "FFT";
    case Regime::kEPEFT: return "EPEFT_ADAPTER";
    case Regime::kDPEFTUncached: return "DPEFT_UNCACHED";
    case Regime::kDPEFTCached: return "DPEFT_CACHED";
  }
  return "unknown";
}

inline Regime parse_regime(const std::string& s) {
  for (Regime r : kAllRegimes) {
    if (to_string(r) == s) return r;
  }
  if (s == "EPEFT") return Regime::kEPEFT;
  throw ConfigError("unknown regime '" + s +
                    "' (expected FFT, EPEFT_ADAPTER, DPEFT_UNCACHED or DPEFT_CACHED)");
}

inline bool is_decoupled(Regime r) {
  return r == Regime::kDPEFTUncached || r == Regime::kDPEFTCached;
}

}  // namespace sanrec
