// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "mofc/tape.hpp"

namespace mofc {

// Number of worker threads for the convolution kernels. Partitioning is by
// output row block, each element written by exactly one thread, so results are
// bit-identical for any thread count.
inline std::atomic<int>& conv_threads() {
  static std::atomic<int> n{1};
  return n;
}
inline void set_num_threads(int n) { conv_threads().store(n < 1 ? 1 : n); }

namespace detail {

template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  int nt = conv_threads().load();
  if (nt <= 1 || rows < 2 * nt) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (rows + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    int r0 = t * chunk, r1 = std::min(rows, r0 + chunk);
    if (r0 >= r1) break;
    pool.emplace_back([&fn, r0, r1] { fn(r0, r1); });
  }
  for (auto& th : pool) th.join();
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// im2col: col[(c*k+ky)*k+kx][p] over output positions p, zeros outside.
template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, int oh, int ow,
            std::vector<T>& col) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::size_t np = static_cast<std::size_t>(oh) * ow;
  col.assign(static_cast<std::size_t>(c) * k * k * np, T(0));
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col.data() + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * np;
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          const T* src = x.ptr() + (static_cast<std::size_t>(ch) * h + sy) * w;
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride - pad + kx;
            if (sx >= 0 && sx < w) dst[ox] = src[sx];
          }
        }
      }
}

template <typename T>
void col2im_add(const std::vector<T>& col, int k, int stride, int pad, int oh, int ow,
                Tensor<T>& gx) {
  int c = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
  std::size_t np = static_cast<std::size_t>(oh) * ow;
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col.data() + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * np;
        for (int oy = 0; oy < oh; ++oy) {
          int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          T* dst = gx.ptr() + (static_cast<std::size_t>(ch) * h + sy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int sx = ox * stride - pad + kx;
            if (sx >= 0 && sx < w) dst[sx] += src[ox];
          }
        }
      }
}

}  // namespace detail

// Plain convolution kernels (no autodiff). Weight layout (O, C, k, k).

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                     int pad) {
  if (x.rank() != 3 || w.rank() != 4) throw dimension_error("conv2d: bad ranks");
  if (x.dim(0) != w.dim(1)) throw dimension_error("conv2d: channel mismatch");
  int o = w.dim(0), k = w.dim(2);
  int oh = detail::conv_out_dim(x.dim(1), k, stride, pad);
  int ow = detail::conv_out_dim(x.dim(2), k, stride, pad);
  if (oh < 1 || ow < 1) throw dimension_error("conv2d: output collapses");
  std::size_t np = static_cast<std::size_t>(oh) * ow;
  std::size_t r = static_cast<std::size_t>(x.dim(0)) * k * k;
  std::vector<T> col;
  detail::im2col(x, k, stride, pad, oh, ow, col);
  Tensor<T> y(shape3(o, oh, ow));
  detail::parallel_rows(o, [&](int m0, int m1) {
    for (int m = m0; m < m1; ++m) {
      T* yrow = y.ptr() + m * np;
      T bias = b.size() ? b[static_cast<std::size_t>(m)] : T(0);
      for (std::size_t p = 0; p < np; ++p) yrow[p] = bias;
      const T* wrow = w.ptr() + m * r;
      for (std::size_t kk = 0; kk < r; ++kk) {
        T wv = wrow[kk];
        if (wv == T(0)) continue;
        const T* crow = col.data() + kk * np;
        for (std::size_t p = 0; p < np; ++p) yrow[p] += wv * crow[p];
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> conv2d_bwd_input(const Tensor<T>& gy, const Tensor<T>& w, int stride, int pad, int in_h,
                           int in_w) {
  int o = w.dim(0), c = w.dim(1), k = w.dim(2);
  if (gy.dim(0) != o) throw dimension_error("conv2d_bwd_input: channel mismatch");
  int oh = gy.dim(1), ow = gy.dim(2);
  std::size_t np = static_cast<std::size_t>(oh) * ow;
  std::size_t r = static_cast<std::size_t>(c) * k * k;
  std::vector<T> gcol(r * np, T(0));
  // gcol = w^T * gy
  detail::parallel_rows(static_cast<int>(r), [&](int r0, int r1) {
    for (int rr = r0; rr < r1; ++rr) {
      T* grow = gcol.data() + static_cast<std::size_t>(rr) * np;
      for (int m = 0; m < o; ++m) {
        T wv = w.ptr()[m * r + rr];
        if (wv == T(0)) continue;
        const T* gyrow = gy.ptr() + m * np;
        for (std::size_t p = 0; p < np; ++p) grow[p] += wv * gyrow[p];
      }
    }
  });
  Tensor<T> gx(shape3(c, in_h, in_w));
  detail::col2im_add(gcol, k, stride, pad, oh, ow, gx);
  return gx;
}

template <typename T>
void conv2d_bwd_params(const Tensor<T>& gy, const Tensor<T>& x, int stride, int pad, int k,
                       Tensor<T>& gw_accum, Tensor<T>& gb_accum) {
  int o = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2);
  std::size_t np = static_cast<std::size_t>(oh) * ow;
  std::size_t r = static_cast<std::size_t>(x.dim(0)) * k * k;
  std::vector<T> col;
  detail::im2col(x, k, stride, pad, oh, ow, col);
  detail::parallel_rows(o, [&](int m0, int m1) {
    for (int m = m0; m < m1; ++m) {
      const T* gyrow = gy.ptr() + m * np;
      T* gwrow = gw_accum.ptr() + m * r;
      for (std::size_t kk = 0; kk < r; ++kk) {
        const T* crow = col.data() + kk * np;
        T s = T(0);
        for (std::size_t p = 0; p < np; ++p) s += gyrow[p] * crow[p];
        gwrow[kk] += s;
      }
      if (gb_accum.size()) {
        T s = T(0);
        for (std::size_t p = 0; p < np; ++p) s += gyrow[p];
        gb_accum[static_cast<std::size_t>(m)] += s;
      }
    }
  });
}

// Transposed convolution, expressed through the conv kernels: forward is the
// adjoint of conv2d_fwd. Weight layout (C_in, C_out, k, k); output dims are
// given explicitly (stride 2 stages pass exactly 2*in).
template <typename T>
Tensor<T> tconv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                      int pad, int out_h, int out_w) {
  if (x.dim(0) != w.dim(0)) throw dimension_error("tconv2d: channel mismatch");
  if (detail::conv_out_dim(out_h, w.dim(2), stride, pad) != x.dim(1) ||
      detail::conv_out_dim(out_w, w.dim(3), stride, pad) != x.dim(2))
    throw dimension_error("tconv2d: output dims inconsistent with input");
  Tensor<T> y = conv2d_bwd_input(x, w, stride, pad, out_h, out_w);
  if (b.size()) {
    int c = y.dim(0);
    std::size_t plane = static_cast<std::size_t>(y.dim(1)) * y.dim(2);
    for (int ch = 0; ch < c; ++ch) {
      T bias = b[static_cast<std::size_t>(ch)];
      T* row = y.ptr() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] += bias;
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Tape wrappers
// ---------------------------------------------------------------------------

template <typename T>
int op_conv2d(Tape<T>& t, int x, int w, int b, int stride, int pad) {
  Tensor<T> y = conv2d_fwd(t.val(x), t.val(w), t.val(b), stride, pad);
  bool rg = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  int in_h = t.val(x).dim(1), in_w = t.val(x).dim(2);
  int k = t.val(w).dim(2);
  return t.make(std::move(y), rg,
                [x, w, b, stride, pad, in_h, in_w, k](Tape<T>& tp, const Tensor<T>& g) {
                  if (tp.needs_grad(x)) {
                    Tensor<T> gx = conv2d_bwd_input(g, tp.val(w), stride, pad, in_h, in_w);
                    Tensor<T>& acc = tp.grad_ref(x);
                    for (std::size_t i = 0; i < gx.size(); ++i) acc[i] += gx[i];
                  }
                  if (tp.needs_grad(w)) {
                    conv2d_bwd_params(g, tp.val(x), stride, pad, k, tp.grad_ref(w),
                                      tp.grad_ref(b));
                  }
                });
}

template <typename T>
int op_tconv2d(Tape<T>& t, int x, int w, int b, int stride, int pad, int out_h, int out_w) {
  Tensor<T> y = tconv2d_fwd(t.val(x), t.val(w), t.val(b), stride, pad, out_h, out_w);
  bool rg = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  int k = t.val(w).dim(2);
  return t.make(std::move(y), rg,
                [x, w, b, stride, pad, k](Tape<T>& tp, const Tensor<T>& g) {
                  if (tp.needs_grad(x)) {
                    Tensor<T> none;
                    Tensor<T> gx = conv2d_fwd(g, tp.val(w), none, stride, pad);
                    Tensor<T>& acc = tp.grad_ref(x);
                    for (std::size_t i = 0; i < gx.size(); ++i) acc[i] += gx[i];
                  }
                  if (tp.needs_grad(w)) {
                    // roles swapped: the tconv input acts as the "output grad";
                    // the virtual conv has no bias of its own
                    Tensor<T> no_gb;
                    conv2d_bwd_params(tp.val(x), g, stride, pad, k, tp.grad_ref(w), no_gb);
                    // bias gradient over the tconv output channels
                    Tensor<T>& gb = tp.grad_ref(b);
                    int c = g.dim(0);
                    std::size_t plane = static_cast<std::size_t>(g.dim(1)) * g.dim(2);
                    for (int ch = 0; ch < c; ++ch) {
                      T s = T(0);
                      const T* row = g.ptr() + ch * plane;
                      for (std::size_t i = 0; i < plane; ++i) s += row[i];
                      gb[static_cast<std::size_t>(ch)] += s;
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Masked (causal) convolution: output at raster position p sees only inputs at
// raster positions strictly before p. Stride 1, odd kernel, same padding.
// ---------------------------------------------------------------------------

// Single-position evaluation shared by the parallel encoder pass and the
// strictly serial decoder pass; both accumulate in identical order, so the
// results are bit-exact across the two.
template <typename T>
void masked_conv_at(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int oy, int ox,
                    T* out) {
  int c = x.dim(0), h = x.dim(1), ww = x.dim(2);
  int o = w.dim(0), k = w.dim(2), half = w.dim(2) / 2;
  for (int m = 0; m < o; ++m) {
    T acc = b.size() ? b[static_cast<std::size_t>(m)] : T(0);
    for (int ch = 0; ch < c; ++ch)
      for (int ky = 0; ky < k; ++ky) {
        int sy = oy - half + ky;
        if (sy < 0 || sy >= h) continue;
        if (ky > half) break;  // rows below center fully masked
        for (int kx = 0; kx < k; ++kx) {
          if (ky == half && kx >= half) break;  // center and right of it masked
          int sx = ox - half + kx;
          if (sx < 0 || sx >= ww) continue;
          acc += w.at4(m, ch, ky, kx) * x.at3(ch, sy, sx);
        }
      }
    out[m] = acc;
  }
}

template <typename T>
Tensor<T> masked_conv_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 3 || w.rank() != 4 || x.dim(0) != w.dim(1) || w.dim(2) % 2 == 0)
    throw dimension_error("masked_conv: bad shapes");
  int o = w.dim(0), h = x.dim(1), ww = x.dim(2);
  Tensor<T> y(shape3(o, h, ww));
  std::vector<T> buf(static_cast<std::size_t>(o));
  for (int oy = 0; oy < h; ++oy)
    for (int ox = 0; ox < ww; ++ox) {
      masked_conv_at(x, w, b, oy, ox, buf.data());
      for (int m = 0; m < o; ++m) y.at3(m, oy, ox) = buf[static_cast<std::size_t>(m)];
    }
  return y;
}

template <typename T>
int op_masked_conv(Tape<T>& t, int x, int w, int b) {
  Tensor<T> y = masked_conv_fwd(t.val(x), t.val(w), t.val(b));
  bool rg = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.make(std::move(y), rg, [x, w, b](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& vx = tp.val(x);
    const Tensor<T>& vw = tp.val(w);
    int c = vx.dim(0), h = vx.dim(1), ww = vx.dim(2);
    int o = vw.dim(0), k = vw.dim(2), half = k / 2;
    bool gx_needed = tp.needs_grad(x), gw_needed = tp.needs_grad(w);
    Tensor<T>* gx = gx_needed ? &tp.grad_ref(x) : nullptr;
    Tensor<T>* gw = gw_needed ? &tp.grad_ref(w) : nullptr;
    Tensor<T>* gb = gw_needed ? &tp.grad_ref(b) : nullptr;
    for (int m = 0; m < o; ++m)
      for (int oy = 0; oy < h; ++oy)
        for (int ox = 0; ox < ww; ++ox) {
          T go = g.at3(m, oy, ox);
          if (go == T(0)) continue;
          if (gb) (*gb)[static_cast<std::size_t>(m)] += go;
          for (int ch = 0; ch < c; ++ch)
            for (int ky = 0; ky <= half; ++ky) {
              int sy = oy - half + ky;
              if (sy < 0 || sy >= h) continue;
              int kx_end = (ky == half) ? half : k;
              for (int kx = 0; kx < kx_end; ++kx) {
                int sx = ox - half + kx;
                if (sx < 0 || sx >= ww) continue;
                if (gx) gx->at3(ch, sy, sx) += go * vw.at4(m, ch, ky, kx);
                if (gw) gw->at4(m, ch, ky, kx) += go * vx.at3(ch, sy, sx);
              }
            }
        }
  });
}

}  // namespace mofc
