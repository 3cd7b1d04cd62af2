// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "mofc/tape.hpp"

namespace mofc {

inline constexpr double kGdnBetaMin = 1e-6;

// Generalized divisive normalization.
//   normalize:  y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)
//   denormalize (IGDN layer): y_i = x_i * sqrt(beta_i + sum_j gamma_ij x_j^2)
// beta: (C), gamma: (C, C). gamma_ij weighs x_j^2 in channel i's denominator.
// Parameters are kept at beta >= kGdnBetaMin, gamma >= 0 by the optimizer's
// projection step; the forward clamps as well so stray inputs cannot produce a
// non-positive normalizer.

namespace detail {

template <typename T>
void gdn_normalizer(const Tensor<T>& x, const Tensor<T>& beta, const Tensor<T>& gamma,
                    Tensor<T>& d) {
  int c = x.dim(0);
  std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<T> xsq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xsq[i] = x[i] * x[i];
  for (int i = 0; i < c; ++i) {
    T* drow = d.ptr() + i * plane;
    T bi = std::max(beta[static_cast<std::size_t>(i)], static_cast<T>(kGdnBetaMin));
    for (std::size_t p = 0; p < plane; ++p) drow[p] = bi;
    for (int j = 0; j < c; ++j) {
      T gij = std::max(gamma.at2(i, j), T(0));
      if (gij == T(0)) continue;
      const T* xrow = xsq.data() + j * plane;
      for (std::size_t p = 0; p < plane; ++p) drow[p] += gij * xrow[p];
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> gdn_eval(const Tensor<T>& x, const Tensor<T>& beta, const Tensor<T>& gamma,
                   bool inverse) {
  int c = x.dim(0);
  if (beta.size() != static_cast<std::size_t>(c) || gamma.dims != shape2(c, c))
    throw dimension_error("gdn: parameter shapes do not match channels");
  Tensor<T> d(x.dims);
  detail::gdn_normalizer(x, beta, gamma, d);
  Tensor<T> y(x.dims);
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = inverse ? x[i] * std::sqrt(d[i]) : x[i] / std::sqrt(d[i]);
  return y;
}

// Exact functional inverse of the normalize form, by fixed-point iteration
// x <- y * sqrt(beta + gamma x^2). Used where a true round trip is needed; the
// synthesis layers use the one-shot denormalize form with their own weights.
template <typename T>
Tensor<T> gdn_invert(const Tensor<T>& y, const Tensor<T>& beta, const Tensor<T>& gamma,
                     int max_iters = 100, T tol = T(1e-12)) {
  Tensor<T> x = y;
  Tensor<T> d(y.dims);
  for (int it = 0; it < max_iters; ++it) {
    detail::gdn_normalizer(x, beta, gamma, d);
    T max_step = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      T nx = y[i] * std::sqrt(d[i]);
      max_step = std::max(max_step, std::abs(nx - x[i]));
      x[i] = nx;
    }
    if (max_step < tol) break;
  }
  return x;
}

template <typename T>
int op_gdn(Tape<T>& t, int x, int beta, int gamma, bool inverse) {
  Tensor<T> y = gdn_eval(t.val(x), t.val(beta), t.val(gamma), inverse);
  bool rg = t.needs_grad(x) || t.needs_grad(beta) || t.needs_grad(gamma);
  return t.make(std::move(y), rg, [x, beta, gamma, inverse](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& vx = tp.val(x);
    const Tensor<T>& vb = tp.val(beta);
    const Tensor<T>& vg = tp.val(gamma);
    int c = vx.dim(0);
    std::size_t plane = static_cast<std::size_t>(vx.dim(1)) * vx.dim(2);
    Tensor<T> d(vx.dims);
    detail::gdn_normalizer(vx, vb, vg, d);
    // e_i = g_i * x_i * d_i^p with p = -3/2 (normalize) or -1/2 (denormalize)
    Tensor<T> e(vx.dims);
    for (std::size_t i = 0; i < vx.size(); ++i) {
      T root = std::sqrt(d[i]);
      e[i] = g[i] * vx[i] / (inverse ? root : root * d[i]);
    }
    T sign = inverse ? T(1) : T(-1);
    if (tp.needs_grad(x)) {
      Tensor<T>& gx = tp.grad_ref(x);
      // diagonal term
      for (std::size_t i = 0; i < vx.size(); ++i) {
        T root = std::sqrt(d[i]);
        gx[i] += g[i] * (inverse ? root : T(1) / root);
      }
      // coupling term: gx_k += sign * x_k * sum_i gamma_ik e_i
      for (int k = 0; k < c; ++k) {
        T* gxrow = gx.ptr() + k * plane;
        const T* xrow = vx.ptr() + k * plane;
        for (int i = 0; i < c; ++i) {
          T gik = std::max(vg.at2(i, k), T(0));
          if (gik == T(0)) continue;
          const T* erow = e.ptr() + i * plane;
          for (std::size_t p = 0; p < plane; ++p) gxrow[p] += sign * gik * xrow[p] * erow[p];
        }
      }
    }
    if (tp.needs_grad(beta)) {
      Tensor<T>& gb = tp.grad_ref(beta);
      for (int i = 0; i < c; ++i) {
        const T* erow = e.ptr() + i * plane;
        T s = T(0);
        for (std::size_t p = 0; p < plane; ++p) s += erow[p];
        gb[static_cast<std::size_t>(i)] += sign * T(0.5) * s;
      }
    }
    if (tp.needs_grad(gamma)) {
      Tensor<T>& gg = tp.grad_ref(gamma);
      for (int i = 0; i < c; ++i) {
        const T* erow = e.ptr() + i * plane;
        for (int j = 0; j < c; ++j) {
          const T* xrow = vx.ptr() + j * plane;
          T s = T(0);
          for (std::size_t p = 0; p < plane; ++p) s += erow[p] * xrow[p] * xrow[p];
          gg.at2(i, j) += sign * T(0.5) * s;
        }
      }
    }
  });
}

}  // namespace mofc
