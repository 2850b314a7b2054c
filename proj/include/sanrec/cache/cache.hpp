// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Hidden-state cache file, all integers and floats little-endian:
//
//   offset  size  field
//   0       4     magic "IISC"
//   4       2     version (1)
//   6       8     encoder fingerprint
//   14      4     item count N
//   18      2     kept layer count m
//   20      2m    kept layer indices, strictly increasing (0 = embeddings)
//   20+2m   4     hidden dim H
//   24+2m         N records sorted by item id:
//                   8        item id
//                   4*m*H    float32 payload, layer-major
//
// File size is exactly (24 + 2m) + N * (8 + 4mH).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sanrec/backbone/encoder.hpp"

namespace sanrec::cache {

inline constexpr char kMagic[4] = {'I', 'I', 'S', 'C'};
inline constexpr std::uint16_t kVersion = 1;

struct CacheHeader {
  std::uint16_t version = kVersion;
  std::uint64_t encoder_fingerprint = 0;
  std::uint32_t item_count = 0;
  std::vector<std::uint16_t> kept_layers;
  std::uint32_t hidden = 0;

  std::uint64_t header_bytes() const;
  std::uint64_t record_bytes() const;
};

constexpr std::uint64_t header_size(std::uint64_t kept_layers) { return 24 + 2 * kept_layers; }
constexpr std::uint64_t record_size(std::uint64_t kept_layers, std::uint64_t hidden) {
  return 8 + 4 * kept_layers * hidden;
}
/// Exact size of a cache holding `items` records.
constexpr std::uint64_t file_size(std::uint64_t items, std::uint64_t kept_layers,
                                  std::uint64_t hidden) {
  return header_size(kept_layers) + items * record_size(kept_layers, hidden);
}

struct BuildSummary {
  std::filesystem::path path;
  std::uint64_t fingerprint = 0;
  std::uint64_t item_count = 0;
  std::uint64_t bytes = 0;
};

/// Writes already-encoded stacks. Every stack must carry exactly `kept_layers`
/// (prune first) and width `hidden`; records are sorted by item id.
BuildSummary write_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                         std::span<const std::uint16_t> kept_layers, std::uint32_t hidden,
                         std::vector<backbone::HiddenStateStack> stacks);

/// Encodes `items` once with the frozen encoder and stores the kept layers.
/// Encoding fans out over `workers` threads; writing is serialized.
template <typename T>
BuildSummary build_cache(const backbone::Encoder<T>& encoder, std::span<const std::uint64_t> items,
                         std::span<const std::uint16_t> keep_layers,
                         const std::filesystem::path& path, std::size_t workers = 1);

/// Random-access reader. The header is parsed and an id -> record offset
/// index is built at open. One instance is not safe for concurrent use;
/// open one reader per thread.
class CacheReader {
 public:
  explicit CacheReader(const std::filesystem::path& path);

  const CacheHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  bool contains(std::uint64_t item_id) const { return index_.contains(item_id); }
  std::vector<std::uint64_t> item_ids() const { return ids_; }

  /// Throws NotFoundError for absent ids.
  backbone::HiddenStateStack read_item(std::uint64_t item_id);
  /// As read_item, but throws StalenessError unless the header fingerprint
  /// equals `expected_fingerprint`.
  backbone::HiddenStateStack read_item(std::uint64_t item_id, std::uint64_t expected_fingerprint);
  backbone::HiddenStateStack read_at(std::size_t record);

  void expect_fingerprint(std::uint64_t expected) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  CacheHeader header_;
  std::vector<std::uint64_t> ids_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// One-shot lookup: opens `path`, optionally checks the fingerprint, reads.
backbone::HiddenStateStack read_item(const std::filesystem::path& path, std::uint64_t item_id,
                                     std::optional<std::uint64_t> expected_fingerprint = {});

enum class IssueKind { kIo, kMagic, kVersion, kLayers, kSize, kCount, kOrder, kNonFinite };

std::string to_string(IssueKind kind);

struct VerifyIssue {
  IssueKind kind;
  std::string message;
};

struct VerifyReport {
  std::filesystem::path path;
  std::vector<VerifyIssue> issues;
  std::uint64_t records_checked = 0;

  bool clean() const noexcept { return issues.empty(); }
  bool has(IssueKind kind) const;
};

/// Structural check: magic and version, strictly increasing layer indices,
/// record count and size consistency, record ordering, and finiteness of a
/// sampled 1% of records (at least one). Never throws on bad content.
VerifyReport verify_cache(const std::filesystem::path& path);

}  // namespace sanrec::cache
