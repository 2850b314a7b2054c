// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include "sanrec/ad/tensor.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::testing {

template <typename T>
ad::Tensor<T> random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  ad::Tensor<T> t(rows, cols);
  for (auto& v : t.data()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

template <typename T>
bool bit_equal(const ad::Tensor<T>& a, const ad::Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sanrec::testing
