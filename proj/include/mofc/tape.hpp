// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "mofc/tensor.hpp"

namespace mofc {

// Reverse-mode automatic differentiation over whole tensors.
//
// Ops append nodes to a Tape; backward() walks the tape in reverse and hands
// each node's output gradient to its backprop closure, which scatters into the
// input nodes' gradient buffers. Granularity is one node per tensor op, so
// bookkeeping cost is negligible next to the convolution kernels.
template <typename T>
class Tape {
 public:
  using BackFn = std::function<void(Tape&, const Tensor<T>&)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until something flows into it
    bool requires_grad = false;
    BackFn backprop;  // null for leaves
  };

  int leaf(Tensor<T> v, bool requires_grad = false) {
    return make(std::move(v), requires_grad, nullptr);
  }

  int make(Tensor<T> v, bool requires_grad, BackFn back) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor<T>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor<T>& val(int id) { return nodes_[static_cast<std::size_t>(id)].value; }

  // For ops whose backward reads their own output value (e.g. exp).
  void set_backprop(int id, BackFn back) {
    nodes_[static_cast<std::size_t>(id)].backprop = std::move(back);
  }

  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Gradient accumulator; allocates a zero tensor on first touch.
  Tensor<T>& grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.dims.empty()) n.grad = Tensor<T>(n.value.dims);
    return n.grad;
  }

  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.dims.empty(); }
  const Tensor<T>& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  void backward(int loss_id) {
    Node& loss = nodes_[static_cast<std::size_t>(loss_id)];
    if (loss.value.size() != 1) throw contract_error("backward: loss must be scalar");
    grad_ref(loss_id).fill(T(1));
    for (int i = loss_id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || !n.backprop) continue;
      if (n.grad.dims.empty()) continue;  // nothing flowed into this node
      n.backprop(*this, n.grad);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {
template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw dimension_error(std::string("shape mismatch in ") + what);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
int op_add(Tape<T>& t, int a, int b) {
  detail::check_same_shape(t.val(a), t.val(b), "add");
  Tensor<T> out = t.val(a);
  const Tensor<T>& vb = t.val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  bool rg = t.needs_grad(a) || t.needs_grad(b);
  return t.make(std::move(out), rg, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

template <typename T>
int op_sub(Tape<T>& t, int a, int b) {
  detail::check_same_shape(t.val(a), t.val(b), "sub");
  Tensor<T> out = t.val(a);
  const Tensor<T>& vb = t.val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  bool rg = t.needs_grad(a) || t.needs_grad(b);
  return t.make(std::move(out), rg, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
int op_mul(Tape<T>& t, int a, int b) {
  detail::check_same_shape(t.val(a), t.val(b), "mul");
  Tensor<T> out = t.val(a);
  const Tensor<T>& vb = t.val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  bool rg = t.needs_grad(a) || t.needs_grad(b);
  return t.make(std::move(out), rg, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& va = tp.val(a);
    const Tensor<T>& vb2 = tp.val(b);
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

template <typename T>
int op_div(Tape<T>& t, int a, int b) {
  detail::check_same_shape(t.val(a), t.val(b), "div");
  Tensor<T> out = t.val(a);
  const Tensor<T>& vb = t.val(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= vb[i];
  bool rg = t.needs_grad(a) || t.needs_grad(b);
  return t.make(std::move(out), rg, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& va = tp.val(a);
    const Tensor<T>& vb2 = tp.val(b);
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb2[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * va[i] / (vb2[i] * vb2[i]);
    }
  });
}

template <typename T>
int op_scale(Tape<T>& t, int a, T s) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v *= s;
  return t.make(std::move(out), t.needs_grad(a), [a, s](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
int op_add_scalar(Tape<T>& t, int a, T s) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v += s;
  return t.make(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
int op_exp(Tape<T>& t, int a) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v = std::exp(v);
  int id = t.make(std::move(out), t.needs_grad(a), nullptr);
  if (t.needs_grad(a)) {
    // capture nothing heavy: read own value back through the tape
    t.set_backprop(id, [a, id](Tape<T>& tp, const Tensor<T>& g) {
      const Tensor<T>& y = tp.val(id);
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
  }
  return id;
}

template <typename T>
int op_log(Tape<T>& t, int a) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v = std::log(v);
  return t.make(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& x = tp.val(a);
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
}

template <typename T>
int op_leaky_relu(Tape<T>& t, int a, T slope) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v = v >= T(0) ? v : slope * v;
  return t.make(std::move(out), t.needs_grad(a), [a, slope](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& x = tp.val(a);
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (x[i] >= T(0) ? T(1) : slope);
  });
}

// clamp with masked gradient: gradient passes only where the value was not
// clipped.
template <typename T>
int op_clamp(Tape<T>& t, int a, T lo, T hi) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v = clamp_val(v, lo, hi);
  return t.make(std::move(out), t.needs_grad(a), [a, lo, hi](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& x = tp.val(a);
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] >= lo && x[i] <= hi) ga[i] += g[i];
  });
}

// clamp with inward straight-through gradient: values saturate, and at a rail
// the gradient still passes when it points back inside the range (so a
// saturated unit can recover) but is blocked when it would push further out.
template <typename T>
int op_clamp_ste(Tape<T>& t, int a, T lo, T hi) {
  Tensor<T> out = t.val(a);
  for (auto& v : out.data) v = clamp_val(v, lo, hi);
  return t.make(std::move(out), t.needs_grad(a), [a, lo, hi](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& x = tp.val(a);
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      // descent direction is -g: block only updates that deepen saturation
      if (x[i] < lo && g[i] > T(0)) continue;
      if (x[i] > hi && g[i] < T(0)) continue;
      ga[i] += g[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Structural ops (channel concat/slice, padding, crop) for C*H*W maps
// ---------------------------------------------------------------------------

template <typename T>
int op_concat_ch(Tape<T>& t, int a, int b) {
  const Tensor<T>& va = t.val(a);
  const Tensor<T>& vb = t.val(b);
  if (va.rank() != 3 || vb.rank() != 3 || va.dim(1) != vb.dim(1) || va.dim(2) != vb.dim(2))
    throw dimension_error("concat_ch: incompatible shapes");
  int ca = va.dim(0), cb = vb.dim(0), h = va.dim(1), w = va.dim(2);
  Tensor<T> out(shape3(ca + cb, h, w));
  std::copy(va.data.begin(), va.data.end(), out.data.begin());
  std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.size());
  bool rg = t.needs_grad(a) || t.needs_grad(b);
  std::size_t na = va.size();
  return t.make(std::move(out), rg, [a, b, na](Tape<T>& tp, const Tensor<T>& g) {
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad_ref(a);
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad_ref(b);
      for (std::size_t i = 0; i < g.size() - na; ++i) gb[i] += g[na + i];
    }
  });
}

template <typename T>
int op_slice_ch(Tape<T>& t, int a, int c0, int c1) {
  const Tensor<T>& va = t.val(a);
  if (va.rank() != 3 || c0 < 0 || c1 > va.dim(0) || c0 >= c1)
    throw dimension_error("slice_ch: bad channel range");
  int h = va.dim(1), w = va.dim(2);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out(shape3(c1 - c0, h, w));
  std::copy(va.data.begin() + c0 * plane, va.data.begin() + c1 * plane, out.data.begin());
  return t.make(std::move(out), t.needs_grad(a), [a, c0, plane](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[c0 * plane + i] += g[i];
  });
}

// Multiply a C*H*W map by a 1*H*W mask broadcast across channels.
template <typename T>
int op_mul_mask(Tape<T>& t, int x, int mask) {
  const Tensor<T>& vx = t.val(x);
  const Tensor<T>& vm = t.val(mask);
  if (vx.rank() != 3 || vm.rank() != 3 || vm.dim(0) != 1 || vm.dim(1) != vx.dim(1) ||
      vm.dim(2) != vx.dim(2))
    throw dimension_error("mul_mask: mask must be 1xHxW matching x");
  int c = vx.dim(0);
  std::size_t plane = vm.size();
  Tensor<T> out = vx;
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] *= vm[i];
  bool rg = t.needs_grad(x) || t.needs_grad(mask);
  return t.make(std::move(out), rg, [x, mask, c, plane](Tape<T>& tp, const Tensor<T>& g) {
    const Tensor<T>& vx2 = tp.val(x);
    const Tensor<T>& vm2 = tp.val(mask);
    if (tp.needs_grad(x)) {
      Tensor<T>& gx = tp.grad_ref(x);
      for (int ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] += g[ch * plane + i] * vm2[i];
    }
    if (tp.needs_grad(mask)) {
      Tensor<T>& gm = tp.grad_ref(mask);
      for (int ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) gm[i] += g[ch * plane + i] * vx2[ch * plane + i];
    }
  });
}

// Symmetric (edge-inclusive) padding. Supports pad sizes up to the dimension
// itself, which reflect-101 cannot.
template <typename T>
int op_pad_symmetric(Tape<T>& t, int a, int top, int bottom, int left, int right) {
  const Tensor<T>& v = t.val(a);
  if (v.rank() != 3) throw dimension_error("pad_symmetric: rank-3 input required");
  int c = v.dim(0), h = v.dim(1), w = v.dim(2);
  if (top > h || bottom > h || left > w || right > w)
    throw dimension_error("pad_symmetric: pad exceeds input size");
  int oh = h + top + bottom, ow = w + left + right;
  auto mirror = [](int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - 1 - i;
    return i;
  };
  Tensor<T> out(shape3(c, oh, ow));
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y) {
      int sy = mirror(y - top, h);
      for (int x = 0; x < ow; ++x) out.at3(ch, y, x) = v.at3(ch, sy, mirror(x - left, w));
    }
  return t.make(std::move(out), t.needs_grad(a),
                [a, c, h, w, top, left, mirror](Tape<T>& tp, const Tensor<T>& g) {
                  Tensor<T>& ga = tp.grad_ref(a);
                  int oh = g.dims[1], ow = g.dims[2];
                  for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < oh; ++y) {
                      int sy = mirror(y - top, h);
                      for (int x = 0; x < ow; ++x)
                        ga.at3(ch, sy, mirror(x - left, w)) += g.at3(ch, y, x);
                    }
                });
}

template <typename T>
int op_crop(Tape<T>& t, int a, int y0, int x0, int h, int w) {
  const Tensor<T>& v = t.val(a);
  if (v.rank() != 3) throw dimension_error("crop: rank-3 input required");
  if (y0 < 0 || x0 < 0 || y0 + h > v.dim(1) || x0 + w > v.dim(2))
    throw dimension_error("crop: window out of bounds");
  int c = v.dim(0);
  Tensor<T> out(shape3(c, h, w));
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at3(ch, y, x) = v.at3(ch, y0 + y, x0 + x);
  return t.make(std::move(out), t.needs_grad(a),
                [a, c, y0, x0, h, w](Tape<T>& tp, const Tensor<T>& g) {
                  Tensor<T>& ga = tp.grad_ref(a);
                  for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h; ++y)
                      for (int x = 0; x < w; ++x) ga.at3(ch, y0 + y, x0 + x) += g.at3(ch, y, x);
                });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
int op_sum(Tape<T>& t, int a) {
  Tensor<T> out(shape1(1));
  out[0] = t.val(a).sum();
  return t.make(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    for (auto& v : ga.data) v += g[0];
  });
}

template <typename T>
int op_mean(Tape<T>& t, int a) {
  std::size_t n = t.val(a).size();
  Tensor<T> out(shape1(1));
  out[0] = t.val(a).sum() / static_cast<T>(n);
  return t.make(std::move(out), t.needs_grad(a), [a, n](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    T s = g[0] / static_cast<T>(n);
    for (auto& v : ga.data) v += s;
  });
}

// 2x2 average pooling, floor semantics (odd trailing row/col dropped).
template <typename T>
int op_avg_pool2(Tape<T>& t, int a) {
  const Tensor<T>& v = t.val(a);
  if (v.rank() != 3) throw dimension_error("avg_pool2: rank-3 input required");
  int c = v.dim(0), h = v.dim(1) / 2, w = v.dim(2) / 2;
  if (h < 1 || w < 1) throw dimension_error("avg_pool2: input too small");
  Tensor<T> out(shape3(c, h, w));
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at3(ch, y, x) = (v.at3(ch, 2 * y, 2 * x) + v.at3(ch, 2 * y, 2 * x + 1) +
                             v.at3(ch, 2 * y + 1, 2 * x) + v.at3(ch, 2 * y + 1, 2 * x + 1)) *
                            T(0.25);
  return t.make(std::move(out), t.needs_grad(a), [a, c, h, w](Tape<T>& tp, const Tensor<T>& g) {
    Tensor<T>& ga = tp.grad_ref(a);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          T s = g.at3(ch, y, x) * T(0.25);
          ga.at3(ch, 2 * y, 2 * x) += s;
          ga.at3(ch, 2 * y, 2 * x + 1) += s;
          ga.at3(ch, 2 * y + 1, 2 * x) += s;
          ga.at3(ch, 2 * y + 1, 2 * x + 1) += s;
        }
  });
}

}  // namespace mofc
