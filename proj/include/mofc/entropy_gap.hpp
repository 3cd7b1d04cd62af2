// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Finite joint distribution of (X, Xtilde), both over integer supports.
// p(i, j) = P(X = x_values[i], Xtilde = xt_values[j]).
struct JointPmf {
  std::vector<int> x_values;
  std::vector<int> xt_values;
  std::vector<double> p;  // row-major |x| * |xt|

  double at(std::size_t i, std::size_t j) const { return p[i * xt_values.size() + j]; }

  void validate() const {
    if (x_values.empty() || xt_values.empty() || p.size() != x_values.size() * xt_values.size())
      throw contract_error("joint pmf: shape mismatch");
    double sum = 0;
    for (double v : p) {
      if (v < 0) throw contract_error("joint pmf: negative mass");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw contract_error("joint pmf: mass does not sum to 1");
  }
};

struct EntropyGap {
  double h_cond = 0;   // H(X | Xtilde), bits
  double h_resid = 0;  // H(X - Xtilde), bits
};

// Exact enumeration of the conditional entropy H(X|Xtilde) and the entropy of
// the difference X - Xtilde.
inline EntropyGap entropy_gap(const JointPmf& pmf) {
  pmf.validate();
  auto plogp = [](double v) { return v > 0 ? -v * std::log2(v) : 0.0; };
  EntropyGap g;
  // H(X | Xt) = H(X, Xt) - H(Xt)
  double h_joint = 0, h_xt = 0;
  for (std::size_t j = 0; j < pmf.xt_values.size(); ++j) {
    double col = 0;
    for (std::size_t i = 0; i < pmf.x_values.size(); ++i) {
      h_joint += plogp(pmf.at(i, j));
      col += pmf.at(i, j);
    }
    h_xt += plogp(col);
  }
  g.h_cond = h_joint - h_xt;
  if (g.h_cond < 0) g.h_cond = 0;  // rounding guard for deterministic cases

  std::map<int, double> diff;
  for (std::size_t i = 0; i < pmf.x_values.size(); ++i)
    for (std::size_t j = 0; j < pmf.xt_values.size(); ++j)
      diff[pmf.x_values[i] - pmf.xt_values[j]] += pmf.at(i, j);
  for (const auto& [d, v] : diff) g.h_resid += plogp(v);
  return g;
}

}  // namespace mofc
