// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "mofc/random.hpp"
#include "mofc/tape.hpp"

namespace mofc {

// Stability floors shared by the rate model and the range-coder tables.
inline constexpr double kScaleMin = 1e-6;   // Laplace scale clamp b_min
inline constexpr double kScaleMax = 256.0;  // keeps coder table support bounded
inline constexpr double kLikelihoodMin = 1.0 / 65536.0;  // p_min = 2^-16

enum class QuantMode { train, eval };

// Plain (non-tape) quantizers -----------------------------------------------

template <typename T>
Tensor<std::int32_t> quantize_round_int(const Tensor<T>& x) {
  Tensor<std::int32_t> q;
  q.dims = x.dims;
  q.data.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q.data[i] = round_half_away(x[i]);
  return q;
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& x, QuantMode mode, Rng* rng = nullptr) {
  Tensor<T> out = x;
  if (mode == QuantMode::train) {
    if (!rng) throw contract_error("quantize: train mode needs an rng");
    for (auto& v : out.data) v += static_cast<T>(rng->uniform() - 0.5);
  } else {
    for (auto& v : out.data) v = static_cast<T>(round_half_away(v));
  }
  return out;
}

// Tape quantizers ------------------------------------------------------------

// Additive-uniform-noise surrogate; the gradient is the identity.
template <typename T>
int op_quantize_noise(Tape<T>& t, int x, Rng& rng) {
  Tensor<T> out = t.val(x);
  for (auto& v : out.data) v += static_cast<T>(rng.uniform() - 0.5);
  return t.make(std::move(out), t.needs_grad(x), [x](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& gx = tp.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Hard rounding with a straight-through gradient. Eval paths only.
template <typename T>
int op_quantize_round(Tape<T>& t, int x) {
  Tensor<T> out = t.val(x);
  for (auto& v : out.data) v = static_cast<T>(round_half_away(v));
  return t.make(std::move(out), t.needs_grad(x), [x](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& gx = tp.grad_ref(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
int op_quantize(Tape<T>& t, int x, QuantMode mode, Rng& rng) {
  return mode == QuantMode::train ? op_quantize_noise(t, x, rng) : op_quantize_round(t, x);
}

// Laplace interval likelihood ------------------------------------------------

namespace detail {

// F((q+0.5-mu)/b) - F((q-0.5-mu)/b) with the standard Laplace CDF, evaluated
// in a cancellation-free arrangement.
template <typename T>
inline T laplace_interval_prob(T z0, T z1) {
  if (z0 >= T(0)) return T(0.5) * std::exp(-z0) * (T(1) - std::exp(z0 - z1));
  if (z1 <= T(0)) return T(0.5) * std::exp(z1) * (T(1) - std::exp(z0 - z1));
  return T(1) - T(0.5) * std::exp(-z1) - T(0.5) * std::exp(z0);
}

template <typename T>
inline T laplace_pdf(T z) {
  return T(0.5) * std::exp(-std::abs(z));
}

}  // namespace detail

// Per-element code length in bits under a Laplace(mu, b) integer-bin model:
//   bits = -log2 max(P, p_min),  P = F((q+0.5-mu)/b) - F((q-0.5-mu)/b)
// Applies unchanged to noise-perturbed values in train mode.
template <typename T>
T laplace_bits_scalar(T q, T mu, T b) {
  b = std::max(b, static_cast<T>(kScaleMin));
  T z0 = (q - T(0.5) - mu) / b;
  T z1 = (q + T(0.5) - mu) / b;
  T p = std::max(detail::laplace_interval_prob(z0, z1), static_cast<T>(kLikelihoodMin));
  return -std::log2(p);
}

template <typename T>
int op_laplace_bits(Tape<T>& t, int q, int mu, int b) {
  detail::check_same_shape(t.val(q), t.val(mu), "laplace_bits");
  detail::check_same_shape(t.val(q), t.val(b), "laplace_bits");
  const Tensor<T>& vq = t.val(q);
  const Tensor<T>& vmu = t.val(mu);
  const Tensor<T>& vb = t.val(b);
  Tensor<T> bits(vq.dims);
  for (std::size_t i = 0; i < vq.size(); ++i)
    bits[i] = laplace_bits_scalar(vq[i], vmu[i], vb[i]);
  bool rg = t.needs_grad(q) || t.needs_grad(mu) || t.needs_grad(b);
  return t.make(std::move(bits), rg, [q, mu, b](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& vq2 = tp.val(q);
    const Tensor<T>& vmu2 = tp.val(mu);
    const Tensor<T>& vb2 = tp.val(b);
    bool nq = tp.needs_grad(q), nmu = tp.needs_grad(mu), nb = tp.needs_grad(b);
    Tensor<T>* gq = nq ? &tp.grad_ref(q) : nullptr;
    Tensor<T>* gmu = nmu ? &tp.grad_ref(mu) : nullptr;
    Tensor<T>* gb = nb ? &tp.grad_ref(b) : nullptr;
    const T ln2 = static_cast<T>(0.6931471805599453);
    for (std::size_t i = 0; i < vq2.size(); ++i) {
      T bc = std::max(vb2[i], static_cast<T>(kScaleMin));
      T z0 = (vq2[i] - T(0.5) - vmu2[i]) / bc;
      T z1 = (vq2[i] + T(0.5) - vmu2[i]) / bc;
      T p = detail::laplace_interval_prob(z0, z1);
      if (p <= static_cast<T>(kLikelihoodMin)) continue;  // floored: zero grad
      T f0 = detail::laplace_pdf(z0), f1 = detail::laplace_pdf(z1);
      T dldp = -g[i] / (p * ln2);
      if (gq) (*gq)[i] += dldp * (f1 - f0) / bc;
      if (gmu) (*gmu)[i] += dldp * (f0 - f1) / bc;
      if (gb && vb2[i] > static_cast<T>(kScaleMin))
        (*gb)[i] += dldp * (f0 * z0 - f1 * z1) / bc;
    }
  });
}

// Broadcast a per-channel vector to a (C,H,W) map.
template <typename T>
int op_expand_ch(Tape<T>& t, int vec, int h, int w) {
  const Tensor<T>& v = t.val(vec);
  if (v.rank() != 1) throw dimension_error("expand_ch: rank-1 input required");
  int c = v.dim(0);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out(shape3(c, h, w));
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = v[static_cast<std::size_t>(ch)];
  return t.make(std::move(out), t.needs_grad(vec), [vec, c, plane](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& gv = tp.grad_ref(vec);
    for (int ch = 0; ch < c; ++ch) {
      T s = T(0);
      for (std::size_t i = 0; i < plane; ++i) s += g[ch * plane + i];
      gv[static_cast<std::size_t>(ch)] += s;
    }
  });
}

}  // namespace mofc
