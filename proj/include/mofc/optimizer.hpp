// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mofc/layers.hpp"

namespace mofc {

// Adam over a parameter bank. Moments live per entry; an entry's step counter
// advances only when the entry is updated, so a frozen network's state is
// untouched across its frozen epochs.
template <typename T>
class Adam {
 public:
  explicit Adam(ParamBank<T>& bank, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : bank_(&bank), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(bank.entries.size());
    v_.reserve(bank.entries.size());
    steps_.assign(bank.entries.size(), 0);
    for (auto& e : bank.entries) {
      m_.emplace_back(e.tensor->dims);
      v_.emplace_back(e.tensor->dims);
    }
  }

  using Entry = typename ParamBank<T>::Entry;

  // grads aligned with bank entries (empty tensor = no gradient this step)
  void step(const std::vector<Tensor<T>>& grads, double lr,
            const std::function<bool(const Entry&)>& active) {
    for (std::size_t i = 0; i < bank_->entries.size(); ++i) {
      auto& e = bank_->entries[i];
      if (!active(e) || grads[i].dims.empty()) continue;
      steps_[i] += 1;
      double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_[i]));
      double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_[i]));
      Tensor<T>& p = *e.tensor;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        double g = static_cast<double>(grads[i][k]);
        double mk = beta1_ * static_cast<double>(m[k]) + (1.0 - beta1_) * g;
        double vk = beta2_ * static_cast<double>(v[k]) + (1.0 - beta2_) * g * g;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        double update = (mk / bc1) / (std::sqrt(vk / bc2) + eps_);
        p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * update);
      }
    }
    bank_->project();
  }

 private:
  ParamBank<T>* bank_;
  double beta1_, beta2_, eps_;
  std::vector<Tensor<T>> m_, v_;
  std::vector<std::int64_t> steps_;
};

}  // namespace mofc
