// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mofc/hyperprior.hpp"

namespace mofc {

// Channel configuration. f: internal features, n: latent channels, m: hyper
// latent channels.
struct Widths {
  int f = 32;
  int n = 48;
  int m = 32;

  void validate() const {
    if (f < 1 || n < 1 || m < 1) throw contract_error("widths must be positive");
  }
};

// alpha = clamp(raw + 0.5, 0, 1); the bias precedes the clip, and the clip is
// a hard clamp whose gradient passes straight through at the rails.
template <typename T>
int op_clip_alpha(Tape<T>& t, int raw) {
  return op_clamp_ste(t, op_add_scalar(t, raw, T(0.5)), T(0), T(1));
}

template <typename T>
Tensor<T> clip_alpha_eval(const Tensor<T>& raw) {
  Tensor<T> out = raw;
  for (auto& v : out.data) v = clamp_val(v + T(0.5), T(0), T(1));
  return out;
}

// Mode-selection and optical-flow network. One analysis transform over the
// concatenated frame pair, an AE-HP entropy model, and one synthesis transform
// emitting three channels: two flow displacements and the raw alpha channel.
// Every stage uses LeakyReLU.
template <typename T>
struct Mofnet {
  ConvLayer<T> a1, a2, a3, a4;
  ConvLayer<T> s1, s2, s3, s4;
  HyperEncoder<T> he;
  HyperDecoder<T> hd;
  ChannelPrior<T> zprior;
  Widths widths;

  void build(const Widths& w, ParamBank<T>& bank) {
    widths = w;
    const std::string p = "mofnet";
    a1.build(6, {w.f, 5, 2, false, false, Nonlinearity::LeakyReLU}, bank, p + ".a1");
    a2.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::LeakyReLU}, bank, p + ".a2");
    a3.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::LeakyReLU}, bank, p + ".a3");
    a4.build(w.f, {w.n, 5, 2, false, false, Nonlinearity::none}, bank, p + ".a4");
    s1.build(w.n, {w.f, 5, 2, true, false, Nonlinearity::LeakyReLU}, bank, p + ".s1");
    s2.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::LeakyReLU}, bank, p + ".s2");
    s3.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::LeakyReLU}, bank, p + ".s3");
    s4.build(w.f, {3, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s4");
    he.build(w.n, w.f, w.m, bank, p + ".ha");
    hd.build(w.m, w.f, 2 * w.n, bank, p + ".hs");
    zprior.build(w.m, bank, p + ".zprior");
  }

  struct Nodes {
    int flow = -1;      // (2,H,W), cropped to frame dims
    int alpha = -1;     // (1,H,W) in [0,1]
    int rate_bits = -1; // scalar: main + hyper estimated bits
    int y_q = -1;       // quantized main latents (n, lh, lw)
    int z_q = -1;       // quantized hyper latents (m, hh, hw)
    int mu = -1, b = -1;        // per-element laplace params for y
    int y_bits = -1, z_bits = -1;  // per-element bit maps
  };

  // ref/cur are padded frame nodes; (out_h, out_w) are the unpadded dims.
  Nodes forward(Tape<T>& t, const BoundParams<T>& bd, int ref_pad, int cur_pad, int out_h,
                int out_w, QuantMode mode, Rng& rng) const {
    Nodes nd;
    int x = op_concat_ch(t, ref_pad, cur_pad);
    x = a4.forward(t, bd, a3.forward(t, bd, a2.forward(t, bd, a1.forward(t, bd, x))));
    int lh = t.val(x).dim(1), lw = t.val(x).dim(2);

    int z = he.forward(t, bd, x);
    nd.z_q = op_quantize(t, z, mode, rng);
    nd.y_q = op_quantize(t, x, mode, rng);

    int feat = hd.forward(t, bd, nd.z_q, lh, lw);
    nd.mu = op_slice_ch(t, feat, 0, widths.n);
    nd.b = op_scale_from_raw(t, op_slice_ch(t, feat, widths.n, 2 * widths.n));

    nd.y_bits = op_laplace_bits(t, nd.y_q, nd.mu, nd.b);
    nd.z_bits = zprior.bits(t, bd, nd.z_q);
    nd.rate_bits = op_add(t, op_sum(t, nd.y_bits), op_sum(t, nd.z_bits));

    int out = s4.forward(t, bd, s3.forward(t, bd, s2.forward(t, bd, s1.forward(t, bd, nd.y_q))));
    if (t.val(out).dim(1) != out_h || t.val(out).dim(2) != out_w)
      out = op_crop(t, out, 0, 0, out_h, out_w);
    nd.flow = op_slice_ch(t, out, 0, 2);
    nd.alpha = op_clip_alpha(t, op_slice_ch(t, out, 2, 3));
    return nd;
  }
};

}  // namespace mofc
