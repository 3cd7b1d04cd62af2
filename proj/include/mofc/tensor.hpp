// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Dense row-major tensor (last dimension fastest). Rank is dynamic; the
// codebase uses rank 1 for parameter vectors, 2 for matrices, 3 for C*H*W
// feature maps and 4 for convolution weights.
template <typename T>
struct Tensor {
  std::vector<int> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)), data(count_of(dims), T(0)) {}
  Tensor(std::vector<int> d, T fill) : dims(std::move(d)), data(count_of(dims), fill) {}

  static std::size_t count_of(const std::vector<int>& d) {
    std::size_t n = 1;
    for (int x : d) {
      if (x < 0) throw dimension_error("negative tensor dimension");
      n *= static_cast<std::size_t>(x);
    }
    return d.empty() ? 0 : n;
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }
  int dim(int i) const { return dims[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // rank-3 (C,H,W) accessors
  T& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * dims[1] + y) * dims[2] + x];
  }
  const T& at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * dims[1] + y) * dims[2] + x];
  }
  // rank-4 (O,I,Kh,Kw) accessors
  T& at4(int o, int i, int ky, int kx) {
    return data[((static_cast<std::size_t>(o) * dims[1] + i) * dims[2] + ky) * dims[3] + kx];
  }
  const T& at4(int o, int i, int ky, int kx) const {
    return data[((static_cast<std::size_t>(o) * dims[1] + i) * dims[2] + ky) * dims[3] + kx];
  }
  T& at2(int r, int c) { return data[static_cast<std::size_t>(r) * dims[1] + c]; }
  const T& at2(int r, int c) const { return data[static_cast<std::size_t>(r) * dims[1] + c]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  T min_value() const { return *std::min_element(data.begin(), data.end()); }
  T max_value() const { return *std::max_element(data.begin(), data.end()); }
  T sum() const { return std::accumulate(data.begin(), data.end(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.dims = dims;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

inline std::vector<int> shape1(int a) { return {a}; }
inline std::vector<int> shape2(int a, int b) { return {a, b}; }
inline std::vector<int> shape3(int a, int b, int c) { return {a, b, c}; }
inline std::vector<int> shape4(int a, int b, int c, int d) { return {a, b, c, d}; }

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<int>& dims, const char* what) {
  if (t.dims != dims) throw dimension_error(std::string("shape mismatch: ") + what);
}

}  // namespace mofc
