// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/adam.hpp"

#include <cmath>

#include "sanrec/error.hpp"

namespace sanrec::recsys {

template <typename T>
Adam<T>::Adam(const AdamConfig& cfg) : cfg_(cfg) {
  if (!(cfg_.lr >= 0.0) || !std::isfinite(cfg_.lr)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
}

template <typename T>
void Adam<T>::step(const std::vector<ad::ParameterStore<T>*>& stores,
                   const ad::Gradients<T>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto* store : stores) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      auto& p = (*store)[i];
      if (!p.trainable) continue;
      auto it = grads.values.find(p.name);
      if (it == grads.values.end()) continue;
      const auto& g = it->second;
      auto& mom = state_[p.name];
      if (mom.m.empty()) {
        mom.m.assign(g.size(), 0.0);
        mom.v.assign(g.size(), 0.0);
      }
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = static_cast<double>(g[k]);
        mom.m[k] = cfg_.beta1 * mom.m[k] + (1.0 - cfg_.beta1) * gk;
        mom.v[k] = cfg_.beta2 * mom.v[k] + (1.0 - cfg_.beta2) * gk * gk;
        const double update = cfg_.lr * (mom.m[k] / c1) / (std::sqrt(mom.v[k] / c2) + cfg_.eps);
        p.value[k] = static_cast<T>(static_cast<double>(p.value[k]) - update);
      }
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sanrec::recsys
