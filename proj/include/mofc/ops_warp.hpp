// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "mofc/tape.hpp"

namespace mofc {

// Backward bilinear warping: out(p) = ref(p + v(p)), sampled bilinearly.
// flow layout (2, H, W): channel 0 horizontal (x) displacement in pixels,
// channel 1 vertical (y). Sample coordinates outside the image are clamped to
// the border (corner indices clamp; the interpolation weights keep their
// unclamped fractions, which makes the sample constant - and its flow
// derivative zero - beyond the edge).

namespace detail {

template <typename T>
struct BilinearTap {
  int x0, x1, y0, y1;
  T fx, fy;
};

template <typename T>
inline BilinearTap<T> bilinear_tap(T sx, T sy, int w, int h) {
  T fx0 = std::floor(sx), fy0 = std::floor(sy);
  BilinearTap<T> t;
  t.fx = sx - fx0;
  t.fy = sy - fy0;
  int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  t.x0 = clamp_val(x0, 0, w - 1);
  t.x1 = clamp_val(x0 + 1, 0, w - 1);
  t.y0 = clamp_val(y0, 0, h - 1);
  t.y1 = clamp_val(y0 + 1, 0, h - 1);
  return t;
}

}  // namespace detail

template <typename T>
Tensor<T> bilinear_warp_eval(const Tensor<T>& ref, const Tensor<T>& flow) {
  if (ref.rank() != 3 || flow.rank() != 3 || flow.dim(0) != 2 || flow.dim(1) != ref.dim(1) ||
      flow.dim(2) != ref.dim(2))
    throw dimension_error("bilinear_warp: flow must be 2xHxW matching the frame");
  int c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out(ref.dims);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T sx = static_cast<T>(x) + flow[static_cast<std::size_t>(y) * w + x];
      T sy = static_cast<T>(y) + flow[plane + static_cast<std::size_t>(y) * w + x];
      auto tp = detail::bilinear_tap(sx, sy, w, h);
      for (int ch = 0; ch < c; ++ch) {
        const T* r = ref.ptr() + ch * plane;
        T a = r[static_cast<std::size_t>(tp.y0) * w + tp.x0];
        T b = r[static_cast<std::size_t>(tp.y0) * w + tp.x1];
        T cc = r[static_cast<std::size_t>(tp.y1) * w + tp.x0];
        T dd = r[static_cast<std::size_t>(tp.y1) * w + tp.x1];
        out[ch * plane + static_cast<std::size_t>(y) * w + x] =
            (T(1) - tp.fy) * ((T(1) - tp.fx) * a + tp.fx * b) +
            tp.fy * ((T(1) - tp.fx) * cc + tp.fx * dd);
      }
    }
  return out;
}

template <typename T>
int op_bilinear_warp(Tape<T>& t, int ref, int flow) {
  Tensor<T> out = bilinear_warp_eval(t.val(ref), t.val(flow));
  bool rg = t.needs_grad(ref) || t.needs_grad(flow);
  return t.make(std::move(out), rg, [ref, flow](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& vref = tp.val(ref);
    const Tensor<T>& vflow = tp.val(flow);
    int c = vref.dim(0), h = vref.dim(1), w = vref.dim(2);
    std::size_t plane = static_cast<std::size_t>(h) * w;
    bool need_ref = tp.needs_grad(ref), need_flow = tp.needs_grad(flow);
    Tensor<T>* gref = need_ref ? &tp.grad_ref(ref) : nullptr;
    Tensor<T>* gflow = need_flow ? &tp.grad_ref(flow) : nullptr;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t pix = static_cast<std::size_t>(y) * w + x;
        T sx = static_cast<T>(x) + vflow[pix];
        T sy = static_cast<T>(y) + vflow[plane + pix];
        auto tap = detail::bilinear_tap(sx, sy, w, h);
        T w00 = (T(1) - tap.fy) * (T(1) - tap.fx);
        T w01 = (T(1) - tap.fy) * tap.fx;
        T w10 = tap.fy * (T(1) - tap.fx);
        T w11 = tap.fy * tap.fx;
        T du = T(0), dv = T(0);
        for (int ch = 0; ch < c; ++ch) {
          T go = g[ch * plane + pix];
          if (go == T(0)) continue;
          const T* r = vref.ptr() + ch * plane;
          T a = r[static_cast<std::size_t>(tap.y0) * w + tap.x0];
          T b = r[static_cast<std::size_t>(tap.y0) * w + tap.x1];
          T cc = r[static_cast<std::size_t>(tap.y1) * w + tap.x0];
          T dd = r[static_cast<std::size_t>(tap.y1) * w + tap.x1];
          if (gref) {
            T* gr = gref->ptr() + ch * plane;
            gr[static_cast<std::size_t>(tap.y0) * w + tap.x0] += go * w00;
            gr[static_cast<std::size_t>(tap.y0) * w + tap.x1] += go * w01;
            gr[static_cast<std::size_t>(tap.y1) * w + tap.x0] += go * w10;
            gr[static_cast<std::size_t>(tap.y1) * w + tap.x1] += go * w11;
          }
          du += go * ((T(1) - tap.fy) * (b - a) + tap.fy * (dd - cc));
          dv += go * ((T(1) - tap.fx) * (cc - a) + tap.fx * (dd - b));
        }
        if (gflow) {
          (*gflow)[pix] += du;
          (*gflow)[plane + pix] += dv;
        }
      }
  });
}

}  // namespace mofc
