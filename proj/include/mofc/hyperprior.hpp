// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include "mofc/layers.hpp"
#include "mofc/ops_rate.hpp"

namespace mofc {

inline const double kLogScaleMin = std::log(kScaleMin);
inline const double kLogScaleMax = std::log(kScaleMax);

// b = exp(clamp(raw, ln b_min, ln b_max)), elementwise on a tape node.
template <typename T>
int op_scale_from_raw(Tape<T>& t, int raw) {
  return op_exp(t, op_clamp(t, raw, static_cast<T>(kLogScaleMin), static_cast<T>(kLogScaleMax)));
}

template <typename T>
T scale_from_raw(T raw) {
  return std::exp(clamp_val(raw, static_cast<T>(kLogScaleMin), static_cast<T>(kLogScaleMax)));
}

// Hyper analysis h_a: one stride-1 stage then two stride-2 stages.
template <typename T>
struct HyperEncoder {
  ConvLayer<T> c1, c2, c3;

  void build(int in_ch, int f, int m, ParamBank<T>& bank, const std::string& prefix) {
    c1.build(in_ch, {f, 3, 1, false, false, Nonlinearity::LeakyReLU}, bank, prefix + ".c1");
    c2.build(f, {f, 5, 2, false, false, Nonlinearity::LeakyReLU}, bank, prefix + ".c2");
    c3.build(f, {m, 5, 2, false, false, Nonlinearity::none}, bank, prefix + ".c3");
  }

  int forward(Tape<T>& t, const BoundParams<T>& bd, int x) const {
    return c3.forward(t, bd, c2.forward(t, bd, c1.forward(t, bd, x)));
  }
};

// Hyper synthesis h_s: two stride-2 transposed stages and a stride-1 head;
// output cropped to the main-latent grid (ceil division upstream can
// overshoot).
template <typename T>
struct HyperDecoder {
  ConvLayer<T> c1, c2, c3;

  void build(int m, int f, int out_ch, ParamBank<T>& bank, const std::string& prefix) {
    c1.build(m, {f, 5, 2, true, false, Nonlinearity::LeakyReLU}, bank, prefix + ".c1");
    c2.build(f, {f, 5, 2, true, false, Nonlinearity::LeakyReLU}, bank, prefix + ".c2");
    c3.build(f, {out_ch, 3, 1, false, false, Nonlinearity::none}, bank, prefix + ".c3");
  }

  int forward(Tape<T>& t, const BoundParams<T>& bd, int z, int target_h, int target_w) const {
    int x = c2.forward(t, bd, c1.forward(t, bd, z));
    if (t.val(x).dim(1) < target_h || t.val(x).dim(2) < target_w)
      throw dimension_error("hyper decoder: undersized output");
    if (t.val(x).dim(1) != target_h || t.val(x).dim(2) != target_w)
      x = op_crop(t, x, 0, 0, target_h, target_w);
    return c3.forward(t, bd, x);
  }
};

// Factorized prior for the hyper latents: Laplace(0, b_c) with one learned
// scale per channel.
template <typename T>
struct ChannelPrior {
  Tensor<T> log_b;

  void build(int channels, ParamBank<T>& bank, const std::string& prefix) {
    log_b = Tensor<T>(shape1(channels));
    bank.add(prefix + ".log_b", log_b, ParamKind::log_scale);
  }

  // per-element bits map for a quantized latent node
  int bits(Tape<T>& t, const BoundParams<T>& bd, int z_q) const {
    const Tensor<T>& v = t.val(z_q);
    int b_map = op_expand_ch(t, op_scale_from_raw(t, bd(log_b)), v.dim(1), v.dim(2));
    int mu = t.leaf(Tensor<T>(v.dims, T(0)));
    return op_laplace_bits(t, z_q, mu, b_map);
  }

  // flattened (mu, b) arrays in the payload's natural (c, y, x) order
  void coder_params(int h, int w, std::vector<double>& mu, std::vector<double>& b) const {
    int c = log_b.dim(0);
    mu.assign(static_cast<std::size_t>(c) * h * w, 0.0);
    b.resize(mu.size());
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
      double bc = scale_from_raw(static_cast<double>(log_b[static_cast<std::size_t>(ch)]));
      for (std::size_t i = 0; i < plane; ++i) b[static_cast<std::size_t>(ch) * plane + i] = bc;
    }
  }
};

// Autoregressive context over dequantized latents: one causal 5x5 stage.
template <typename T>
struct ContextModel {
  ConvLayer<T> conv;

  void build(int n, ParamBank<T>& bank, const std::string& prefix) {
    conv.build(n, {2 * n, 5, 1, false, true, Nonlinearity::none}, bank, prefix + ".conv");
  }

  int forward(Tape<T>& t, const BoundParams<T>& bd, int y_q) const {
    return conv.forward(t, bd, y_q);
  }
};

// Entropy-parameter head: 1x1 stack over concatenated hyper + context
// features, emitting (mu, raw_b) per latent element.
template <typename T>
struct EntropyParams {
  ConvLayer<T> c1, c2;
  int n = 0;

  void build(int in_ch, int latent_n, ParamBank<T>& bank, const std::string& prefix) {
    n = latent_n;
    c1.build(in_ch, {3 * latent_n, 1, 1, false, false, Nonlinearity::LeakyReLU}, bank,
             prefix + ".c1");
    c2.build(3 * latent_n, {2 * latent_n, 1, 1, false, false, Nonlinearity::none}, bank,
             prefix + ".c2");
  }

  struct MuB {
    int mu;
    int b;
  };

  MuB forward(Tape<T>& t, const BoundParams<T>& bd, int features) const {
    int out = c2.forward(t, bd, c1.forward(t, bd, features));
    MuB r;
    r.mu = op_slice_ch(t, out, 0, n);
    r.b = op_scale_from_raw(t, op_slice_ch(t, out, n, 2 * n));
    return r;
  }
};

// Latent grid geometry: frames pad to multiples of 16 (4 stride-2 stages);
// hyper latents live two further halvings down (ceil).
inline int pad_to_multiple(int v, int m) { return (v + m - 1) / m * m; }
inline int ceil_div2(int v) { return (v + 1) / 2; }

struct LatentDims {
  int ph = 0, pw = 0;  // padded frame
  int lh = 0, lw = 0;  // main latent grid
  int hh = 0, hw = 0;  // hyper latent grid
};

inline LatentDims latent_dims_for(int h, int w) {
  LatentDims d;
  d.ph = pad_to_multiple(h, 16);
  d.pw = pad_to_multiple(w, 16);
  d.lh = d.ph / 16;
  d.lw = d.pw / 16;
  d.hh = ceil_div2(ceil_div2(d.lh));
  d.hw = ceil_div2(ceil_div2(d.lw));
  return d;
}

// Symmetric-pad a frame node up to the padded grid.
template <typename T>
int op_pad_frame(Tape<T>& t, int x, const LatentDims& d) {
  const Tensor<T>& v = t.val(x);
  int extra_h = d.ph - v.dim(1), extra_w = d.pw - v.dim(2);
  if (extra_h == 0 && extra_w == 0) return x;
  return op_pad_symmetric(t, x, 0, extra_h, 0, extra_w);
}

}  // namespace mofc
