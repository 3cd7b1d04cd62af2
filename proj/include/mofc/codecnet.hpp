// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mofc/hyperprior.hpp"
#include "mofc/mofnet.hpp"

namespace mofc {

// Conditional coder c(alpha*pred, alpha*cur): the current-frame branch mixes
// in the prediction after its first analysis stage; a separate full analysis
// of the prediction alone produces latents the decoder recomputes for free.
// Only the current-frame latents are quantized, entropy coded and counted.
// g_a/g_s use GDN/IGDN; hyper and context stages use LeakyReLU.
template <typename T>
struct CodecNet {
  // current-branch analysis (prediction injected after stage 1)
  ConvLayer<T> ac1, ap1, ac2, ac3, ac4;
  GdnLayer<T> gc1, gp1, gc2, gc3;
  // prediction-only analysis (decoder-side recomputable)
  ConvLayer<T> bp1, bp2, bp3, bp4;
  GdnLayer<T> hp1, hp2, hp3;
  // synthesis over cat(quantized current latents, prediction latents)
  ConvLayer<T> s1, s2, s3, s4;
  GdnLayer<T> is1, is2, is3;
  HyperEncoder<T> he;
  HyperDecoder<T> hd;
  ChannelPrior<T> zprior;
  ContextModel<T> ctx;
  EntropyParams<T> ep;
  Widths widths;

  void build(const Widths& w, ParamBank<T>& bank, const std::string& p = "codecnet") {
    widths = w;
    ac1.build(3, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".ac1");
    gc1.build(w.f, false, bank, p + ".gc1");
    ap1.build(3, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".ap1");
    gp1.build(w.f, false, bank, p + ".gp1");
    ac2.build(2 * w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".ac2");
    gc2.build(w.f, false, bank, p + ".gc2");
    ac3.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".ac3");
    gc3.build(w.f, false, bank, p + ".gc3");
    ac4.build(w.f, {w.n, 5, 2, false, false, Nonlinearity::none}, bank, p + ".ac4");

    bp1.build(3, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".bp1");
    hp1.build(w.f, false, bank, p + ".hp1");
    bp2.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".bp2");
    hp2.build(w.f, false, bank, p + ".hp2");
    bp3.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".bp3");
    hp3.build(w.f, false, bank, p + ".hp3");
    bp4.build(w.f, {w.n, 5, 2, false, false, Nonlinearity::none}, bank, p + ".bp4");

    s1.build(2 * w.n, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s1");
    is1.build(w.f, true, bank, p + ".is1");
    s2.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s2");
    is2.build(w.f, true, bank, p + ".is2");
    s3.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s3");
    is3.build(w.f, true, bank, p + ".is3");
    s4.build(w.f, {3, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s4");

    he.build(w.n, w.f, w.m, bank, p + ".ha");
    hd.build(w.m, w.f, 2 * w.n, bank, p + ".hs");
    zprior.build(w.m, bank, p + ".zprior");
    ctx.build(w.n, bank, p + ".ctx");
    ep.build(4 * w.n, w.n, bank, p + ".ep");
  }

  struct Nodes {
    int recon = -1;      // (3, ph, pw): reconstruction of alpha*cur, padded grid
    int rate_bits = -1;  // scalar
    int y_q = -1;        // quantized current-frame latents
    int z_q = -1;
    int y_pred = -1;     // prediction-branch latents (continuous, not coded)
    int mu = -1, b = -1;
    int y_bits = -1, z_bits = -1;
  };

  // analysis of the prediction alone; shared verbatim by the decoder
  int pred_latents(Tape<T>& t, const BoundParams<T>& bd, int masked_pred_pad) const {
    int x = hp1.forward(t, bd, bp1.forward(t, bd, masked_pred_pad));
    x = hp2.forward(t, bd, bp2.forward(t, bd, x));
    x = hp3.forward(t, bd, bp3.forward(t, bd, x));
    return bp4.forward(t, bd, x);
  }

  // hyper-side features for the entropy model; shared by the decoder
  int hyper_features(Tape<T>& t, const BoundParams<T>& bd, int z_q, int lh, int lw) const {
    return hd.forward(t, bd, z_q, lh, lw);
  }

  int synthesize(Tape<T>& t, const BoundParams<T>& bd, int y_cur_q, int y_pred) const {
    int x = op_concat_ch(t, y_cur_q, y_pred);
    x = is1.forward(t, bd, s1.forward(t, bd, x));
    x = is2.forward(t, bd, s2.forward(t, bd, x));
    x = is3.forward(t, bd, s3.forward(t, bd, x));
    return s4.forward(t, bd, x);
  }

  Nodes forward(Tape<T>& t, const BoundParams<T>& bd, int masked_pred_pad, int masked_cur_pad,
                QuantMode mode, Rng& rng) const {
    Nodes nd;
    // current branch with prediction mixed in after stage 1
    int xc = gc1.forward(t, bd, ac1.forward(t, bd, masked_cur_pad));
    int xp = gp1.forward(t, bd, ap1.forward(t, bd, masked_pred_pad));
    int x = op_concat_ch(t, xc, xp);
    x = gc2.forward(t, bd, ac2.forward(t, bd, x));
    x = gc3.forward(t, bd, ac3.forward(t, bd, x));
    x = ac4.forward(t, bd, x);
    int lh = t.val(x).dim(1), lw = t.val(x).dim(2);

    nd.y_pred = pred_latents(t, bd, masked_pred_pad);

    int z = he.forward(t, bd, x);
    nd.z_q = op_quantize(t, z, mode, rng);
    nd.y_q = op_quantize(t, x, mode, rng);

    int hyper_feat = hyper_features(t, bd, nd.z_q, lh, lw);
    int ctx_feat = ctx.forward(t, bd, nd.y_q);
    auto mub = ep.forward(t, bd, op_concat_ch(t, hyper_feat, ctx_feat));
    nd.mu = mub.mu;
    nd.b = mub.b;

    nd.y_bits = op_laplace_bits(t, nd.y_q, nd.mu, nd.b);
    nd.z_bits = zprior.bits(t, bd, nd.z_q);
    nd.rate_bits = op_add(t, op_sum(t, nd.y_bits), op_sum(t, nd.z_bits));

    nd.recon = synthesize(t, bd, nd.y_q, nd.y_pred);
    return nd;
  }
};

// Residual variant for the ablation: a single-branch AE-HP over
// (current - prediction); reconstruction adds the decoded residual back onto
// the prediction.
template <typename T>
struct ResidualCodec {
  ConvLayer<T> a1, a2, a3, a4;
  GdnLayer<T> g1, g2, g3;
  ConvLayer<T> s1, s2, s3, s4;
  GdnLayer<T> i1, i2, i3;
  HyperEncoder<T> he;
  HyperDecoder<T> hd;
  ChannelPrior<T> zprior;
  ContextModel<T> ctx;
  EntropyParams<T> ep;
  Widths widths;

  void build(const Widths& w, ParamBank<T>& bank, const std::string& p = "residual") {
    widths = w;
    a1.build(3, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".a1");
    g1.build(w.f, false, bank, p + ".g1");
    a2.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".a2");
    g2.build(w.f, false, bank, p + ".g2");
    a3.build(w.f, {w.f, 5, 2, false, false, Nonlinearity::none}, bank, p + ".a3");
    g3.build(w.f, false, bank, p + ".g3");
    a4.build(w.f, {w.n, 5, 2, false, false, Nonlinearity::none}, bank, p + ".a4");
    s1.build(w.n, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s1");
    i1.build(w.f, true, bank, p + ".i1");
    s2.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s2");
    i2.build(w.f, true, bank, p + ".i2");
    s3.build(w.f, {w.f, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s3");
    i3.build(w.f, true, bank, p + ".i3");
    s4.build(w.f, {3, 5, 2, true, false, Nonlinearity::none}, bank, p + ".s4");
    he.build(w.n, w.f, w.m, bank, p + ".ha");
    hd.build(w.m, w.f, 2 * w.n, bank, p + ".hs");
    zprior.build(w.m, bank, p + ".zprior");
    ctx.build(w.n, bank, p + ".ctx");
    ep.build(4 * w.n, w.n, bank, p + ".ep");
  }

  struct Nodes {
    int recon = -1;     // prediction + decoded residual, padded grid
    int residual = -1;  // decoded residual alone
    int rate_bits = -1;
    int y_q = -1, z_q = -1;
    int mu = -1, b = -1;
    int y_bits = -1, z_bits = -1;
  };

  int hyper_features(Tape<T>& t, const BoundParams<T>& bd, int z_q, int lh, int lw) const {
    return hd.forward(t, bd, z_q, lh, lw);
  }

  int synthesize(Tape<T>& t, const BoundParams<T>& bd, int y_q) const {
    int x = i1.forward(t, bd, s1.forward(t, bd, y_q));
    x = i2.forward(t, bd, s2.forward(t, bd, x));
    x = i3.forward(t, bd, s3.forward(t, bd, x));
    return s4.forward(t, bd, x);
  }

  Nodes forward(Tape<T>& t, const BoundParams<T>& bd, int masked_pred_pad, int masked_cur_pad,
                QuantMode mode, Rng& rng) const {
    Nodes nd;
    int r = op_sub(t, masked_cur_pad, masked_pred_pad);
    int x = g1.forward(t, bd, a1.forward(t, bd, r));
    x = g2.forward(t, bd, a2.forward(t, bd, x));
    x = g3.forward(t, bd, a3.forward(t, bd, x));
    x = a4.forward(t, bd, x);
    int lh = t.val(x).dim(1), lw = t.val(x).dim(2);

    int z = he.forward(t, bd, x);
    nd.z_q = op_quantize(t, z, mode, rng);
    nd.y_q = op_quantize(t, x, mode, rng);

    int hyper_feat = hyper_features(t, bd, nd.z_q, lh, lw);
    int ctx_feat = ctx.forward(t, bd, nd.y_q);
    auto mub = ep.forward(t, bd, op_concat_ch(t, hyper_feat, ctx_feat));
    nd.mu = mub.mu;
    nd.b = mub.b;

    nd.y_bits = op_laplace_bits(t, nd.y_q, nd.mu, nd.b);
    nd.z_bits = zprior.bits(t, bd, nd.z_q);
    nd.rate_bits = op_add(t, op_sum(t, nd.y_bits), op_sum(t, nd.z_bits));

    nd.residual = synthesize(t, bd, nd.y_q);
    nd.recon = op_add(t, masked_pred_pad, nd.residual);
    return nd;
  }
};

}  // namespace mofc
