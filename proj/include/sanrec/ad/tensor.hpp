// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sanrec/error.hpp"

namespace sanrec::ad {

/// Two-dimensional shape. Vectors are 1 x n rows, scalars are 1 x 1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t numel() const noexcept { return rows * cols; }
  bool is_scalar() const noexcept { return rows == 1 && cols == 1; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

/// Dense row-major matrix. T is float for training and double for the
/// gradient verification mode.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> values)
      : shape_{rows, cols}, data_(std::move(values)) {
    if (data_.size() != shape_.numel()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.str());
    }
  }

  static Tensor scalar(T v) { return Tensor(1, 1, v); }
  static Tensor row_vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  T item() const {
    if (!shape_.is_scalar()) {
      throw ContractError("item() on non-scalar tensor " + shape_.str());
    }
    return data_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_.rows, shape_.cols);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace sanrec::ad
