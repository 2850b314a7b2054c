// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace sanrec::recsys {

using ItemId = std::uint64_t;
using UserId = std::uint64_t;

/// Chronological item sequences per user plus the item catalog (every item
/// seen in any sequence, ascending).
struct InteractionDataset {
  std::map<UserId, std::vector<ItemId>> users;
  std::vector<ItemId> catalog;

  std::size_t interaction_count() const;
  /// Recomputes `catalog` from the sequences.
  void rebuild_catalog();
};

/// Parses `user<TAB>item item ...` lines. Blank lines are skipped. A user
/// appearing twice has the sequences concatenated in file order.
/// Throws InputError with the line number on malformed input.
InteractionDataset read_interactions(const std::filesystem::path& path);
void write_interactions(const std::filesystem::path& path, const InteractionDataset& data);

struct UserSplit {
  UserId user = 0;
  std::vector<ItemId> train;
  ItemId validation = 0;
  ItemId test = 0;

  /// train followed by the validation item: the prefix used to score test.
  std::vector<ItemId> test_prefix() const;
};

struct Split {
  std::vector<UserSplit> users;
  /// Users with fewer than 3 interactions.
  std::size_t dropped = 0;
};

/// Last item to test, penultimate to validation, the rest to training.
/// Throws InputError on an empty dataset or when every user is dropped.
Split split_leave_one_out(const InteractionDataset& data);

/// Smoothed training-split popularity p_i = (count_i + 1) / (total + |catalog|),
/// indexed like `catalog`.
class Popularity {
 public:
  Popularity(const Split& split, const std::vector<ItemId>& catalog);

  /// Throws NotFoundError for items outside the catalog.
  double at(ItemId item) const;
  const std::vector<ItemId>& catalog() const noexcept { return catalog_; }
  const std::vector<double>& values() const noexcept { return p_; }

 private:
  std::vector<ItemId> catalog_;
  std::vector<double> p_;
};

}  // namespace sanrec::recsys
