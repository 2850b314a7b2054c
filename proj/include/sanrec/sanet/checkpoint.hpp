// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Model checkpoint, little-endian:
//
//   magic "IISM", u16 version (1), u8 variant,
//   two plans (text, then image), each:
//     u8 mode, u16 source layers, u16 group size, u16 m, m x u16 kept,
//   u64 config hash, u32 parameter count,
//   per parameter in declaration order: u32 element count, float32 values.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sanrec/ad/parameter.hpp"
#include "sanrec/sanet/layerdrop.hpp"
#include "sanrec/sanet/model.hpp"

namespace sanrec::sanet {

inline constexpr char kCheckpointMagic[4] = {'I', 'I', 'S', 'M'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointInfo {
  Variant variant = Variant::kVA;
  LayerDropPlan text_plan;
  LayerDropPlan image_plan;
  std::uint64_t config_hash = 0;
  std::uint32_t parameter_count = 0;
};

/// Writes every parameter of `stores`, in order, trainable or not.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const std::vector<const ad::ParameterStore<T>*>& stores);

/// Header only. Throws FormatError / VersionError.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Restores values into `stores`, which must have the saved layout.
/// Throws StalenessError if `expected_hash` differs from the stored hash.
template <typename T>
CheckpointInfo load_checkpoint(const std::filesystem::path& path,
                               const std::vector<ad::ParameterStore<T>*>& stores,
                               std::uint64_t expected_hash);

}  // namespace sanrec::sanet
