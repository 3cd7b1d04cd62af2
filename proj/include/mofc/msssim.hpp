// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mofc/tape.hpp"

namespace mofc {

// Multi-scale structural similarity, built from tape ops so the same code
// serves both the metric and the training distortion term.
//
// 11-tap Gaussian window (sigma 1.5), valid-mode correlation, 2x2 average-pool
// downsampling between scales, standard five-scale weights. Inputs whose
// smaller dimension cannot sustain five scales (min dim < 176 = 11 * 2^4) use
// the largest feasible scale count with the leading weights renormalized.

inline constexpr std::array<double, 5> kMsssimWeights = {0.0448, 0.2856, 0.3001, 0.2363,
                                                         0.1333};
inline constexpr int kSsimWindow = 11;

namespace detail {

template <typename T>
std::vector<T> gaussian_taps(int n, T sigma) {
  std::vector<T> k(static_cast<std::size_t>(n));
  int half = n / 2;
  T sum = T(0);
  for (int i = 0; i < n; ++i) {
    T d = static_cast<T>(i - half);
    k[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (T(2) * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// window for the given input: the standard 11 taps, shrunk to the largest odd
// size that fits when the input is smaller (sigma scales with the window)
inline int window_for(int h, int w) {
  int d = std::min(h, w);
  if (d >= kSsimWindow) return kSsimWindow;
  int win = d - (d % 2 == 0 ? 1 : 0);
  if (win < 3) throw dimension_error("ms_ssim: input smaller than a 3-tap window");
  return win;
}

inline int feasible_scales(int h, int w, int window) {
  int m = 0, d = std::min(h, w);
  while (m < 5 && d >= window) {
    ++m;
    d /= 2;
  }
  return m;
}

}  // namespace detail

// Depthwise separable valid-mode Gaussian blur.
template <typename T>
int op_gauss_blur_valid(Tape<T>& t, int x, const std::vector<T>& taps) {
  const Tensor<T>& v = t.val(x);
  int c = v.dim(0), h = v.dim(1), w = v.dim(2);
  int k = static_cast<int>(taps.size());
  int oh = h - k + 1, ow = w - k + 1;
  if (oh < 1 || ow < 1) throw dimension_error("gauss_blur: window larger than input");
  Tensor<T> tmp(shape3(c, h, ow));
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xo = 0; xo < ow; ++xo) {
        T s = T(0);
        for (int j = 0; j < k; ++j) s += taps[static_cast<std::size_t>(j)] * v.at3(ch, y, xo + j);
        tmp.at3(ch, y, xo) = s;
      }
  Tensor<T> out(shape3(c, oh, ow));
  for (int ch = 0; ch < c; ++ch)
    for (int yo = 0; yo < oh; ++yo)
      for (int xo = 0; xo < ow; ++xo) {
        T s = T(0);
        for (int i = 0; i < k; ++i) s += taps[static_cast<std::size_t>(i)] * tmp.at3(ch, yo + i, xo);
        out.at3(ch, yo, xo) = s;
      }
  return t.make(std::move(out), t.needs_grad(x),
                [x, taps, c, h, w, k, oh, ow](Tape<T>& tp, const Tensor<T>& g) {
                  // adjoint of the two valid passes, in reverse order
                  Tensor<T> gtmp(shape3(c, h, ow));
                  for (int ch = 0; ch < c; ++ch)
                    for (int yo = 0; yo < oh; ++yo)
                      for (int xo = 0; xo < ow; ++xo) {
                        T go = g.at3(ch, yo, xo);
                        if (go == T(0)) continue;
                        for (int i = 0; i < k; ++i)
                          gtmp.at3(ch, yo + i, xo) += go * taps[static_cast<std::size_t>(i)];
                      }
                  Tensor<T>& gx = tp.grad_ref(x);
                  for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h; ++y)
                      for (int xo = 0; xo < ow; ++xo) {
                        T go = gtmp.at3(ch, y, xo);
                        if (go == T(0)) continue;
                        for (int j = 0; j < k; ++j)
                          gx.at3(ch, y, xo + j) += go * taps[static_cast<std::size_t>(j)];
                      }
                });
}

namespace detail {

// mean luminance*contrast map terms at one scale; returns {mean_cs, mean_ssim}
template <typename T>
struct ScaleStats {
  int mean_cs;
  int mean_ssim;
};

template <typename T>
ScaleStats<T> ssim_scale(Tape<T>& t, int a, int b, const std::vector<T>& taps) {
  const T c1 = static_cast<T>(0.01 * 0.01);
  const T c2 = static_cast<T>(0.03 * 0.03);
  int mu_a = op_gauss_blur_valid(t, a, taps);
  int mu_b = op_gauss_blur_valid(t, b, taps);
  int aa = op_mul(t, a, a);
  int bb = op_mul(t, b, b);
  int ab = op_mul(t, a, b);
  int mu_aa = op_mul(t, mu_a, mu_a);
  int mu_bb = op_mul(t, mu_b, mu_b);
  int mu_ab = op_mul(t, mu_a, mu_b);
  int var_a = op_sub(t, op_gauss_blur_valid(t, aa, taps), mu_aa);
  int var_b = op_sub(t, op_gauss_blur_valid(t, bb, taps), mu_bb);
  int cov = op_sub(t, op_gauss_blur_valid(t, ab, taps), mu_ab);
  int cs_num = op_add_scalar(t, op_scale(t, cov, T(2)), c2);
  int cs_den = op_add_scalar(t, op_add(t, var_a, var_b), c2);
  int cs_map = op_div(t, cs_num, cs_den);
  int l_num = op_add_scalar(t, op_scale(t, mu_ab, T(2)), c1);
  int l_den = op_add_scalar(t, op_add(t, mu_aa, mu_bb), c1);
  int l_map = op_div(t, l_num, l_den);
  ScaleStats<T> s;
  s.mean_cs = op_mean(t, cs_map);
  s.mean_ssim = op_mean(t, op_mul(t, l_map, cs_map));
  return s;
}

}  // namespace detail

// Scalar node: MS-SSIM(a, b). Inputs are (C,H,W) maps with matching shapes.
template <typename T>
int op_ms_ssim(Tape<T>& t, int a, int b) {
  if (!t.val(a).same_shape(t.val(b))) throw dimension_error("ms_ssim: shape mismatch");
  if (t.val(a).rank() != 3) throw dimension_error("ms_ssim: rank-3 inputs required");
  int window = detail::window_for(t.val(a).dim(1), t.val(a).dim(2));
  int scales = detail::feasible_scales(t.val(a).dim(1), t.val(a).dim(2), window);
  std::vector<T> taps = detail::gaussian_taps<T>(
      window, static_cast<T>(1.5) * static_cast<T>(window) / static_cast<T>(kSsimWindow));
  T wsum = T(0);
  for (int s = 0; s < scales; ++s) wsum += static_cast<T>(kMsssimWeights[static_cast<std::size_t>(s)]);
  // accumulate log of the weighted product; floor each factor to keep the log
  // defined if a term goes non-positive
  const T floor_v = static_cast<T>(1e-8);
  int log_acc = -1;
  int xa = a, xb = b;
  for (int s = 0; s < scales; ++s) {
    T wgt = static_cast<T>(kMsssimWeights[static_cast<std::size_t>(s)]) / wsum;
    auto st = detail::ssim_scale(t, xa, xb, taps);
    int term = (s == scales - 1) ? st.mean_ssim : st.mean_cs;
    int safe = op_clamp(t, term, floor_v, T(2));
    int wlog = op_scale(t, op_log(t, safe), wgt);
    log_acc = (log_acc < 0) ? wlog : op_add(t, log_acc, wlog);
    if (s + 1 < scales) {
      xa = op_avg_pool2(t, xa);
      xb = op_avg_pool2(t, xb);
    }
  }
  return op_exp(t, log_acc);
}

// Plain metric wrappers ------------------------------------------------------

template <typename T>
T ms_ssim(const Tensor<T>& a, const Tensor<T>& b) {
  Tape<T> t;
  int ia = t.leaf(a), ib = t.leaf(b);
  return t.val(op_ms_ssim(t, ia, ib))[0];
}

// MS-SSIM_dB = -10 log10(1 - MS-SSIM), capped at 80 dB as 1 - score reaches
// 1e-8 (and for score >= 1).
inline double ms_ssim_db(double score) {
  double gap = 1.0 - score;
  if (gap < 1e-8) gap = 1e-8;
  return -10.0 * std::log10(gap);
}

}  // namespace mofc
