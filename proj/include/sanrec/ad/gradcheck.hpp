// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sanrec/ad/tape.hpp"

namespace sanrec::ad {

/// Builds a scalar loss on the given tape from the current parameter values.
template <typename T>
using LossFn = std::function<Var<T>(Tape<T>&)>;

struct ParamCheck {
  std::string name;
  std::size_t elements = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

/// Per-parameter comparison of tape gradients against central differences.
/// Relative error of one element is |g - d| / max(|g|, |d|, floor) with
/// floor = kScaleFloor * max_k |d_k| over the same parameter (plus 1e-12).
/// The floor keeps elements sitting on a gradient zero-crossing from turning
/// rounding noise into unbounded relative error.
struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;

  double max_rel_err() const;
  bool passed() const { return max_rel_err() < tolerance; }
  bool empty() const { return params.empty(); }
};

inline constexpr double kScaleFloor = 1e-3;
inline constexpr double kRelErrFloor = 1e-12;

/// Central-difference gradient of every trainable parameter, evaluated in
/// the store's own precision. The store is restored exactly afterwards.
template <typename T>
std::map<std::string, std::vector<double>> central_differences(ParameterStore<T>& store,
                                                               const LossFn<T>& loss_fn,
                                                               double step);

/// Gradients from one backward pass on a fresh tape.
template <typename T>
Gradients<T> tape_gradients(ParameterStore<T>& store, const LossFn<T>& loss_fn);

/// Compares tape gradients (any precision) with central differences.
template <typename T>
GradCheckReport compare_gradients(const Gradients<T>& tape,
                                  const std::map<std::string, std::vector<double>>& reference,
                                  double tolerance);

template <typename T>
GradCheckReport finite_difference_check(ParameterStore<T>& store, const LossFn<T>& loss_fn,
                                        double step, double tolerance);

}  // namespace sanrec::ad
