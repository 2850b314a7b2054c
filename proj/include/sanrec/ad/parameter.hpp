// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sanrec/ad/tensor.hpp"

namespace sanrec::ad {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

/// Owns a model's parameters in declaration order. Parameter addresses are
/// stable for the lifetime of the store, so modules keep raw pointers.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>& add(std::string name, Tensor<T> value, bool trainable = true) {
    if (index_.contains(name)) {
      throw ConfigError("duplicate parameter name '" + name + "'");
    }
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<T>>(
        Parameter<T>{std::move(name), std::move(value), trainable}));
    return *params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw NotFoundError("no parameter named '" + std::string(name) + "'");
  }
  const Parameter<T>& at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw NotFoundError("no parameter named '" + std::string(name) + "'");
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  void set_trainable(bool trainable) {
    for (auto& p : params_) p->trainable = trainable;
  }

  /// Total scalar count, optionally restricted to trainable parameters.
  std::size_t numel(bool trainable_only = false) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (!trainable_only || p->trainable) n += p->value.size();
    }
    return n;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->name);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace sanrec::ad
