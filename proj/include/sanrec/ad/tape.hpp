// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sanrec/ad/parameter.hpp"
#include "sanrec/ad/tensor.hpp"

namespace sanrec::ad {

template <typename T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by one backward pass, keyed by parameter name.
/// `reached` lists the parameters the loss actually depends on; the
/// remaining trainable parameters of the supplied stores carry zeros.
template <typename T>
struct Gradients {
  std::map<std::string, Tensor<T>> values;
  std::set<std::string> reached;

  bool contains(const std::string& name) const { return values.contains(name); }
  const Tensor<T>& at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw NotFoundError("no gradient for '" + name + "'");
    return it->second;
  }
};

enum class GradMode { kEnabled, kDisabled };

/// Records executed operations so gradients can be replayed in reverse.
/// With GradMode::kDisabled the tape only evaluates values; nothing is
/// retained for backward. Single-threaded; one tape per thread.
template <typename T>
class Tape {
 public:
  /// Called during backward with the node's own id. Reads tape.grad(self)
  /// and accumulates into parent buffers obtained from tape.grad_buffer().
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(GradMode mode = GradMode::kEnabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  GradMode mode() const noexcept { return mode_; }
  bool grad_enabled() const noexcept { return mode_ == GradMode::kEnabled; }

  Var<T> constant(Tensor<T> value);
  /// Free leaf that requires grad (not tied to a parameter).
  Var<T> variable(Tensor<T> value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  /// Non-trainable parameters become constants referencing the storage.
  Var<T> param(Parameter<T>& p);

  /// Appends an op result. `fn` is dropped unless some parent requires grad.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, zero-allocated on first use.
  Tensor<T>& grad_buffer(std::size_t id);
  /// Gradient accumulated so far (empty tensor when none).
  const Tensor<T>& grad(std::size_t id) const { return nodes_[id].grad; }

  /// Reverse pass from a scalar loss. Every trainable parameter in `stores`
  /// appears in the result (zeros when unreachable); frozen ones never do.
  Gradients<T> backward(Var<T> loss, const std::vector<const ParameterStore<T>*>& stores = {});

  /// Labels nodes created inside the scope (e.g. "backbone"), so callers can
  /// ask whether any such intermediate was retained for backward.
  class TagScope {
   public:
    TagScope(Tape& tape, const char* tag) : tape_(tape), prev_(tape.tag_) { tape.tag_ = tag; }
    ~TagScope() { tape_.tag_ = prev_; }
    TagScope(const TagScope&) = delete;
    TagScope& operator=(const TagScope&) = delete;

   private:
    Tape& tape_;
    const char* prev_;
  };

  /// Number of nodes carrying `tag` that were recorded with a backward rule.
  std::size_t retained_with_tag(std::string_view tag) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t matmul_flops() const noexcept { return matmul_flops_; }
  void add_matmul_flops(std::uint64_t n) noexcept { matmul_flops_ += n; }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
    const char* tag = nullptr;
  };

  Var<T> push(Node node);

  GradMode mode_;
  std::deque<Node> nodes_;  // deque: value references stay valid across pushes
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  const char* tag_ = nullptr;
  std::uint64_t matmul_flops_ = 0;
  bool consumed_ = false;
};

}  // namespace sanrec::ad
