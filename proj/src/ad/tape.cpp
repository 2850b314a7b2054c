// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/ad/tape.hpp"

#include <cstring>

namespace sanrec::ad {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  node.tag = tag_;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled();
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var<T>(this, it->second);
  }
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = grad_enabled() && p.trainable;
  Var<T> v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (nodes_[p.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (nodes_[p.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Shape& s = value(id).shape();
    n.grad = Tensor<T>(s.rows, s.cols);
  }
  return n.grad;
}

template <typename T>
Gradients<T> Tape<T>::backward(Var<T> loss, const std::vector<const ParameterStore<T>*>& stores) {
  if (loss.valid() && &loss.tape() != this) {
    throw ContractError("backward: loss belongs to a different tape");
  }
  if (!value(loss.id()).shape().is_scalar()) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        value(loss.id()).shape().str());
  }
  if (consumed_) throw ContractError("backward: tape already consumed");
  consumed_ = true;

  Gradients<T> out;
  for (const auto* store : stores) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      const auto& p = (*store)[i];
      if (p.trainable) out.values[p.name] = Tensor<T>(p.value.rows(), p.value.cols());
    }
  }
  if (!nodes_[loss.id()].requires_grad) return out;

  grad_buffer(loss.id())[0] = T(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      out.values[n.param->name] = n.grad;
      out.reached.insert(n.param->name);
    }
  }
  return out;
}

template <typename T>
std::size_t Tape<T>::retained_with_tag(std::string_view tag) const {
  std::size_t count = 0;
  for (const auto& n : nodes_) {
    if (n.backward && n.tag != nullptr && tag == n.tag) ++count;
  }
  return count;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sanrec::ad
