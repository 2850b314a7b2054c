// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sanrec/recsys/adam.hpp"
#include "sanrec/recsys/dataset.hpp"
#include "sanrec/recsys/metrics.hpp"
#include "sanrec/recsys/recommender.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::recsys {

struct TrainOptions {
  std::size_t epochs = 10;
  /// Users per step.
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 1;
};

struct StepReport {
  double loss = 0.0;
  /// Loss terms (user positions) in the step; 0 means the step was skipped.
  std::size_t terms = 0;
  /// Parameters that received a gradient.
  std::set<std::string> reached;
  /// Backbone intermediates the tape kept for a backward pass.
  std::size_t backbone_nodes_retained = 0;
};

struct TrainResult {
  /// Mean step loss per epoch.
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Next-item training over every position of each user's training prefix
/// (the last max_seq_len + 1 items), with in-batch debiased cross-entropy
/// and Adam. Batch order and dropout masks come from separate generators
/// seeded by `options.seed`.
template <typename T>
class Trainer {
 public:
  Trainer(Recommender<T>& rec, const Split& split, const Popularity& popularity,
          const TrainOptions& options);

  /// One update on the given users (indices into split.users).
  StepReport step(std::span<const std::size_t> users);
  /// One pass over all users in shuffled batches; returns the mean step loss.
  double run_epoch();
  TrainResult run(const std::function<void(std::size_t epoch, double loss)>& on_epoch = {});

 private:
  Recommender<T>& rec_;
  const Split& split_;
  const Popularity& popularity_;
  TrainOptions options_;
  Adam<T> adam_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  std::size_t steps_ = 0;
};

enum class EvalTarget { kValidation, kTest };

/// Full-catalog ranking of each user's held-out item. Test scoring uses the
/// training prefix plus the validation item. Users are spread over
/// `workers` threads; results do not depend on the worker count.
template <typename T>
MetricReport evaluate(const Recommender<T>& rec, const Split& split,
                      const std::vector<ItemId>& catalog, EvalTarget target = EvalTarget::kTest,
                      std::size_t workers = 1);

}  // namespace sanrec::recsys
