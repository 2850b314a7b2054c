// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "sanrec/error.hpp"

namespace sanrec::recsys {

std::size_t pessimistic_rank(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) throw ContractError("rank: target index out of range");
  const double t = scores[target];
  std::size_t above = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != target && scores[j] >= t) ++above;
  }
  return above + 1;
}

double hit_at(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

std::string MetricReport::line() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "METRICS hr10=%.6f ndcg10=%.6f users=%zu", hr10, ndcg10, users);
  return buf;
}

void MetricAccumulator::add(std::size_t rank) {
  hits_ += hit_at(rank);
  ndcg_ += ndcg_at(rank);
  ++n_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.users = n_;
  if (n_ > 0) {
    r.hr10 = hits_ / static_cast<double>(n_);
    r.ndcg10 = ndcg_ / static_cast<double>(n_);
  }
  return r;
}

MetricReport popularity_baseline(const Split& split, const Popularity& popularity) {
  const auto& catalog = popularity.catalog();
  const auto& p = popularity.values();
  if (catalog.empty()) throw InputError("popularity baseline: empty catalog");
  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::vector<std::size_t> rank_of(catalog.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r + 1;

  MetricAccumulator acc;
  for (const auto& u : split.users) {
    auto it = std::lower_bound(catalog.begin(), catalog.end(), u.test);
    if (it == catalog.end() || *it != u.test) {
      throw InputError("test item " + std::to_string(u.test) + " of user " +
                       std::to_string(u.user) + " is not in the catalog");
    }
    acc.add(rank_of[static_cast<std::size_t>(it - catalog.begin())]);
  }
  return acc.report();
}

}  // namespace sanrec::recsys
