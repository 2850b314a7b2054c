// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sanrec::ad {

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_err);
  return m;
}

template <typename T>
std::map<std::string, std::vector<double>> central_differences(ParameterStore<T>& store,
                                                               const LossFn<T>& loss_fn,
                                                               double step) {
  if (!(step > 0.0)) throw ContractError("central_differences: step must be positive");
  auto eval = [&] {
    Tape<T> tape(GradMode::kDisabled);
    return static_cast<double>(loss_fn(tape).value().item());
  };
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter<T>& p = store[i];
    if (!p.trainable) continue;
    std::vector<double> d(p.value.size());
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T original = p.value[k];
      const T up = original + static_cast<T>(step);
      const T down = original - static_cast<T>(step);
      p.value[k] = up;
      const double f_up = eval();
      p.value[k] = down;
      const double f_down = eval();
      p.value[k] = original;
      // Use the representable step, not the requested one.
      d[k] = (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
    }
    out.emplace(p.name, std::move(d));
  }
  return out;
}

template <typename T>
Gradients<T> tape_gradients(ParameterStore<T>& store, const LossFn<T>& loss_fn) {
  Tape<T> tape;
  Var<T> loss = loss_fn(tape);
  return tape.backward(loss, {&store});
}

template <typename T>
GradCheckReport compare_gradients(const Gradients<T>& tape,
                                  const std::map<std::string, std::vector<double>>& reference,
                                  double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& [name, ref] : reference) {
    const Tensor<T>& g = tape.at(name);
    if (g.size() != ref.size()) {
      throw DimensionError("compare_gradients: size mismatch for '" + name + "'");
    }
    ParamCheck pc;
    pc.name = name;
    pc.elements = ref.size();
    double scale = 0.0;
    for (double r : ref) scale = std::max(scale, std::abs(r));
    const double floor = std::max(kScaleFloor * scale, kRelErrFloor);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      const double gv = static_cast<double>(g[k]);
      const double abs_err = std::abs(gv - ref[k]);
      const double denom = std::max({std::abs(gv), std::abs(ref[k]), floor});
      pc.max_abs_err = std::max(pc.max_abs_err, abs_err);
      pc.max_rel_err = std::max(pc.max_rel_err, abs_err / denom);
    }
    report.params.push_back(std::move(pc));
  }
  return report;
}

template <typename T>
GradCheckReport finite_difference_check(ParameterStore<T>& store, const LossFn<T>& loss_fn,
                                        double step, double tolerance) {
  const auto reference = central_differences(store, loss_fn, step);
  const auto grads = tape_gradients(store, loss_fn);
  return compare_gradients(grads, reference, tolerance);
}

#define SANREC_INSTANTIATE_GRADCHECK(T)                                                        \
  template std::map<std::string, std::vector<double>> central_differences(                     \
      ParameterStore<T>&, const LossFn<T>&, double);                                           \
  template Gradients<T> tape_gradients(ParameterStore<T>&, const LossFn<T>&);                  \
  template GradCheckReport compare_gradients(                                                  \
      const Gradients<T>&, const std::map<std::string, std::vector<double>>&, double);         \
  template GradCheckReport finite_difference_check(ParameterStore<T>&, const LossFn<T>&, double, \
                                                   double);

SANREC_INSTANTIATE_GRADCHECK(float)
SANREC_INSTANTIATE_GRADCHECK(double)

}  // namespace sanrec::ad
