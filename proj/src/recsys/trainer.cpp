// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <thread>
#include <utility>

#include "sanrec/error.hpp"
#include "sanrec/recsys/loss.hpp"

namespace sanrec::recsys {

template <typename T>
Trainer<T>::Trainer(Recommender<T>& rec, const Split& split, const Popularity& popularity,
                    const TrainOptions& options)
    : rec_(rec),
      split_(split),
      popularity_(popularity),
      options_(options),
      adam_(AdamConfig{options.lr}),
      shuffle_rng_(mix64(options.seed, 0x5348UL)),
      dropout_rng_(mix64(options.seed, 0x4452UL)) {
  if (options_.batch_size < 1) throw ConfigError("batch size must be >= 1");
}

template <typename T>
StepReport Trainer<T>::step(std::span<const std::size_t> users) {
  const std::size_t max_len = rec_.seq().config().max_len;
  std::vector<std::span<const ItemId>> windows;
  std::vector<const UserSplit*> owners;
  std::vector<ItemId> candidates;
  for (std::size_t u : users) {
    const auto& us = split_.users.at(u);
    auto window = truncate_left(std::span<const ItemId>(us.train), max_len + 1);
    if (window.size() < 2) continue;
    windows.push_back(window);
    owners.push_back(&us);
    candidates.insert(candidates.end(), window.begin(), window.end());
  }
  StepReport report;
  if (windows.empty()) return report;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  auto column = [&](ItemId id) {
    return static_cast<std::size_t>(std::lower_bound(candidates.begin(), candidates.end(), id) -
                                    candidates.begin());
  };

  ad::Tape<T> tape;
  auto items = rec_.item_embeddings(tape, candidates);
  auto items_t = ad::transpose(items);

  DebiasedBatch batch;
  batch.candidates = candidates;
  for (ItemId id : candidates) batch.popularity.push_back(popularity_.at(id));
  std::vector<ad::Var<T>> logits;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto window = windows[w];
    std::vector<std::size_t> inputs;
    for (std::size_t i = 0; i + 1 < window.size(); ++i) inputs.push_back(column(window[i]));
    auto seq_in = ad::gather_rows(items, std::span<const std::size_t>(inputs));
    auto out = rec_.seq().forward(tape, seq_in, &dropout_rng_);
    logits.push_back(ad::matmul(out, items_t));

    std::vector<std::uint8_t> history(candidates.size(), 0);
    for (ItemId id : owners[w]->train) {
      auto it = std::lower_bound(candidates.begin(), candidates.end(), id);
      if (it != candidates.end() && *it == id) history[static_cast<std::size_t>(it - candidates.begin())] = 1;
    }
    for (std::size_t i = 1; i < window.size(); ++i) {
      batch.positive.push_back(column(window[i]));
      batch.excluded.insert(batch.excluded.end(), history.begin(), history.end());
    }
  }
  auto all_logits = logits.size() == 1 ? logits[0] : ad::concat_rows(logits);
  auto loss = inbatch_debiased_ce(all_logits, batch);

  auto grads = tape.backward(loss, std::as_const(rec_).stores());
  adam_.step(rec_.stores(), grads);
  ++steps_;

  report.loss = static_cast<double>(loss.value()[0]);
  report.terms = batch.rows();
  report.reached = grads.reached;
  report.backbone_nodes_retained = tape.retained_with_tag("backbone");
  return report;
}

template <typename T>
double Trainer<T>::run_epoch() {
  std::vector<std::size_t> order(split_.users.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng_.shuffle(std::span<std::size_t>(order));
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t start = 0; start < order.size(); start += options_.batch_size) {
    const std::size_t end = std::min(order.size(), start + options_.batch_size);
    auto r = step(std::span<const std::size_t>(order.data() + start, end - start));
    if (r.terms == 0) continue;
    total += r.loss;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

template <typename T>
TrainResult Trainer<T>::run(const std::function<void(std::size_t, double)>& on_epoch) {
  TrainResult result;
  for (std::size_t e = 0; e < options_.epochs; ++e) {
    result.epoch_loss.push_back(run_epoch());
    if (on_epoch) on_epoch(e, result.epoch_loss.back());
  }
  result.steps = steps_;
  return result;
}

template <typename T>
MetricReport evaluate(const Recommender<T>& rec, const Split& split,
                      const std::vector<ItemId>& catalog, EvalTarget target, std::size_t workers) {
  if (catalog.empty()) throw InputError("evaluate: empty catalog");
  if (!std::is_sorted(catalog.begin(), catalog.end())) {
    throw ContractError("evaluate: catalog must be sorted");
  }
  auto index_of = [&](ItemId id) -> std::size_t {
    auto it = std::lower_bound(catalog.begin(), catalog.end(), id);
    if (it == catalog.end() || *it != id) {
      throw InputError("item " + std::to_string(id) + " is not in the catalog");
    }
    return static_cast<std::size_t>(it - catalog.begin());
  };

  // Catalog embeddings, value only, in fixed chunks.
  const std::size_t d = rec.seq().config().d_model;
  ad::Tensor<T> table(catalog.size(), d);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < catalog.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, catalog.size() - start);
    ad::Tape<T> tape(ad::GradMode::kDisabled);
    auto e = rec.item_embeddings(tape, std::span<const ItemId>(catalog.data() + start, n));
    std::copy(e.value().data().begin(), e.value().data().end(), table.data().begin() + start * d);
  }

  // Resolve every index before spawning workers so lookup errors surface here.
  struct Query {
    std::vector<std::size_t> prefix;
    std::size_t target;
  };
  const std::size_t max_len = rec.seq().config().max_len;
  std::vector<Query> queries;
  for (const auto& u : split.users) {
    const auto prefix = target == EvalTarget::kTest ? u.test_prefix() : u.train;
    const auto window = truncate_left(std::span<const ItemId>(prefix), max_len);
    Query q;
    for (ItemId id : window) q.prefix.push_back(index_of(id));
    q.target = index_of(target == EvalTarget::kTest ? u.test : u.validation);
    queries.push_back(std::move(q));
  }

  std::vector<std::size_t> ranks(queries.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(catalog.size());
    for (std::size_t q = begin; q < end; ++q) {
      ad::Tape<T> tape(ad::GradMode::kDisabled);
      auto x = ad::gather_rows(tape.constant(table), std::span<const std::size_t>(queries[q].prefix));
      auto state = rec.seq().user_state(tape, x);
      const auto& sv = state.value();
      for (std::size_t i = 0; i < catalog.size(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          s += static_cast<double>(sv[c]) * static_cast<double>(table(i, c));
        }
        scores[i] = s;
      }
      ranks[q] = pessimistic_rank(scores, queries[q].target);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, queries.size()));
  if (workers == 1) {
    work(0, queries.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(queries.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  MetricAccumulator acc;
  for (std::size_t r : ranks) acc.add(r);
  return acc.report();
}

template class Trainer<float>;
template class Trainer<double>;
template MetricReport evaluate(const Recommender<float>&, const Split&, const std::vector<ItemId>&,
                               EvalTarget, std::size_t);
template MetricReport evaluate(const Recommender<double>&, const Split&, const std::vector<ItemId>&,
                               EvalTarget, std::size_t);

}  // namespace sanrec::recsys
