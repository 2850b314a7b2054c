// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sanrec/ad/parameter.hpp"
#include "sanrec/ad/tape.hpp"

namespace sanrec::recsys {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam without weight decay. Moments are kept per parameter name; only
/// trainable parameters with an entry in the gradient map move.
template <typename T>
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg);

  void step(const std::vector<ad::ParameterStore<T>*>& stores, const ad::Gradients<T>& grads);
  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace sanrec::recsys
