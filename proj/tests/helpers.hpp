// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mofc/random.hpp"
#include "mofc/tape.hpp"

namespace mofc::test {

inline Tensor<double> random_tensor(std::vector<int> dims, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  Tensor<double> t(std::move(dims));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

template <typename T>
Tensor<T> random_tensor_t(std::vector<int> dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(dims));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Finite-difference gradient verification. `build` constructs the graph from
// leaf ids (in input order) and returns a scalar loss node. Checks up to
// `max_coords` coordinates per input (all when the input is small) and returns
// the worst relative error observed.
inline double gradcheck(std::vector<Tensor<double>> inputs,
                        const std::function<int(Tape<double>&, const std::vector<int>&)>& build,
                        double h = 1e-5, int max_coords = 24, std::uint64_t seed = 7) {
  auto eval = [&](const std::vector<Tensor<double>>& ins) {
    Tape<double> t;
    std::vector<int> ids;
    ids.reserve(ins.size());
    for (const auto& x : ins) ids.push_back(t.leaf(x, false));
    return t.val(build(t, ids))[0];
  };
  // analytic pass
  Tape<double> t;
  std::vector<int> ids;
  for (const auto& x : inputs) ids.push_back(t.leaf(x, true));
  int loss = build(t, ids);
  t.backward(loss);
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::size_t n = inputs[k].size();
    std::vector<std::size_t> coords;
    if (n <= static_cast<std::size_t>(max_coords)) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords; ++i) coords.push_back(rng.below(n));
    }
    for (std::size_t c : coords) {
      double orig = inputs[k][c];
      inputs[k][c] = orig + h;
      double up = eval(inputs);
      inputs[k][c] = orig - h;
      double dn = eval(inputs);
      inputs[k][c] = orig;
      double fd = (up - dn) / (2 * h);
      double an = t.has_grad(ids[k]) ? t.grad(ids[k])[c] : 0.0;
      double rel = std::abs(fd - an) / std::max({1e-6, std::abs(fd), std::abs(an)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Scratch directory for file-format tests; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    base_ = std::filesystem::temp_directory_path() /
            ("mofc_test_" + tag + "_" + std::to_string(stamp));
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  std::filesystem::path path() const { return base_; }
  std::string str(const std::string& rel) const { return (base_ / rel).string(); }

 private:
  std::filesystem::path base_;
};

}  // namespace mofc::test
