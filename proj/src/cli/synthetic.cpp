// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/cli/synthetic.hpp"

#include <numeric>
#include <vector>

#include "sanrec/error.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::cli {

void SyntheticSpec::validate() const {
  if (items < 11) {
    throw ConfigError("synthetic data needs at least 11 items for HR@10 to mean anything, got " +
                      std::to_string(items));
  }
  if (users < 1) throw ConfigError("synthetic data needs at least one user");
  if (min_len < 3 || min_len > max_len) {
    throw ConfigError("synthetic sequence lengths need 3 <= min_len <= max_len");
  }
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ConfigError("planted strength must be in [0, 1]");
  }
}

namespace {

std::map<recsys::ItemId, recsys::ItemId> make_table(const SyntheticSpec& spec, Rng& rng) {
  std::vector<recsys::ItemId> cycle(spec.items);
  std::iota(cycle.begin(), cycle.end(), recsys::ItemId{1});
  rng.shuffle(std::span<recsys::ItemId>(cycle));
  std::map<recsys::ItemId, recsys::ItemId> next;
  for (std::size_t i = 0; i < cycle.size(); ++i) next[cycle[i]] = cycle[(i + 1) % cycle.size()];
  return next;
}

}  // namespace

std::map<recsys::ItemId, recsys::ItemId> transition_table(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(mix64(spec.seed, fnv1a("transitions")));
  return make_table(spec, rng);
}

recsys::InteractionDataset generate_synthetic(const SyntheticSpec& spec) {
  const auto next = transition_table(spec);
  Rng rng(mix64(spec.seed, fnv1a("sequences")));
  recsys::InteractionDataset data;
  const std::size_t span = spec.max_len - spec.min_len + 1;
  for (std::size_t u = 1; u <= spec.users; ++u) {
    const std::size_t len = spec.min_len + static_cast<std::size_t>(rng.below(span));
    auto& seq = data.users[u];
    seq.push_back(1 + rng.below(spec.items));
    while (seq.size() < len) {
      // Always draw both numbers so the stream layout is independent of strength.
      const double follow = rng.uniform();
      const recsys::ItemId jump = 1 + rng.below(spec.items);
      seq.push_back(follow < spec.strength ? next.at(seq.back()) : jump);
    }
  }
  data.rebuild_catalog();
  return data;
}

}  // namespace sanrec::cli
