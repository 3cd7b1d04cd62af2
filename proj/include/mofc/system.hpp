// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mofc/bitstream.hpp"
#include "mofc/codecnet.hpp"
#include "mofc/frame.hpp"
#include "mofc/laplace_table.hpp"
#include "mofc/mofnet.hpp"
#include "mofc/msssim.hpp"
#include "mofc/ops_warp.hpp"

namespace mofc {

enum class SystemMode { full, codecnet_only, skip_only, residual_skip };

inline const char* to_string(SystemMode m) {
  switch (m) {
    case SystemMode::full: return "full";
    case SystemMode::codecnet_only: return "codecnet_only";
    case SystemMode::skip_only: return "skip_only";
    case SystemMode::residual_skip: return "residual_skip";
  }
  return "?";
}

inline SystemMode system_mode_from(const std::string& s) {
  if (s == "full") return SystemMode::full;
  if (s == "codecnet_only") return SystemMode::codecnet_only;
  if (s == "skip_only") return SystemMode::skip_only;
  if (s == "residual_skip") return SystemMode::residual_skip;
  throw contract_error("unknown mode: " + s);
}

// The two subnetworks plus the ablation residual coder, with every parameter
// registered in one bank. Not copyable: the bank holds pointers into the
// member layers.
template <typename T>
struct PFrameModel {
  Widths widths;        // MOFNet channels
  Widths codec_widths;  // CodecNet / residual-coder channels
  Mofnet<T> mofnet;
  CodecNet<T> codecnet;
  ResidualCodec<T> residual;
  ParamBank<T> bank;

  explicit PFrameModel(const Widths& w) : PFrameModel(w, w) {}

  PFrameModel(const Widths& w, const Widths& wc) {
    w.validate();
    wc.validate();
    widths = w;
    codec_widths = wc;
    mofnet.build(w, bank);
    codecnet.build(wc, bank);
    residual.build(wc, bank);
  }
  PFrameModel(const PFrameModel&) = delete;
  PFrameModel& operator=(const PFrameModel&) = delete;

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    bank.initialize(rng);
    bank.project();
  }
};

// Eq.-style blend: (1 - alpha) * pred + codec_recon, clamped to [0,1]. The
// codec term already carries its alpha-masked content.
template <typename T>
Tensor<T> reconstruct(const Tensor<T>& alpha, const Tensor<T>& pred,
                      const Tensor<T>& codec_recon) {
  if (alpha.rank() != 3 || alpha.dim(0) != 1 || pred.dim(1) != alpha.dim(1) ||
      pred.dim(2) != alpha.dim(2) || !pred.same_shape(codec_recon))
    throw dimension_error("reconstruct: shape mismatch");
  std::size_t plane = static_cast<std::size_t>(alpha.dim(1)) * alpha.dim(2);
  Tensor<T> out(pred.dims);
  for (int c = 0; c < pred.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      T v = (T(1) - alpha[i]) * pred[c * plane + i] + codec_recon[c * plane + i];
      out[c * plane + i] = clamp_val(v, T(0), T(1));
    }
  return out;
}

template <typename T>
struct SystemNodes {
  int recon = -1;  // clamped (3,H,W)
  int pred = -1;   // warped reference (3,H,W)
  int alpha = -1;  // effective alpha (1,H,W)
  int flow = -1;
  int rate_m = -1;  // scalar bits
  int rate_c = -1;  // scalar bits (zero leaf in skip_only)
  typename Mofnet<T>::Nodes mof;
  typename CodecNet<T>::Nodes codec;
  typename ResidualCodec<T>::Nodes resid;
  bool has_codec = false;
  bool has_resid = false;
  LatentDims dims;
};

// Full coding-path graph for one pair. ref/cur are unpadded (3,H,W) leaves in
// [0,1]. alpha_override (a 1xHxW node) replaces the mode-selection output when
// >= 0; the phase-1 trainer uses it for the frozen half mask.
template <typename T>
SystemNodes<T> forward_system(Tape<T>& t, const PFrameModel<T>& model, const BoundParams<T>& bd,
                              int ref, int cur, SystemMode mode, QuantMode qmode, Rng& rng,
                              int alpha_override = -1) {
  const Tensor<T>& rv = t.val(ref);
  if (!rv.same_shape(t.val(cur))) throw dimension_error("forward_system: pair shape mismatch");
  int h = rv.dim(1), w = rv.dim(2);
  SystemNodes<T> out;
  out.dims = latent_dims_for(h, w);

  int ref_pad = op_pad_frame(t, ref, out.dims);
  int cur_pad = op_pad_frame(t, cur, out.dims);
  out.mof = model.mofnet.forward(t, bd, ref_pad, cur_pad, h, w, qmode, rng);
  out.flow = out.mof.flow;
  out.rate_m = out.mof.rate_bits;

  if (alpha_override >= 0) {
    out.alpha = alpha_override;
  } else if (mode == SystemMode::skip_only) {
    out.alpha = t.leaf(Tensor<T>(shape3(1, h, w), T(0)));
  } else if (mode == SystemMode::codecnet_only) {
    out.alpha = t.leaf(Tensor<T>(shape3(1, h, w), T(1)));
  } else {
    out.alpha = out.mof.alpha;
  }

  out.pred = op_bilinear_warp(t, ref, out.flow);

  if (mode == SystemMode::skip_only) {
    out.rate_c = t.leaf(Tensor<T>(shape1(1), T(0)));
    out.recon = op_clamp_ste(t, out.pred, T(0), T(1));
    return out;
  }

  int masked_pred = op_mul_mask(t, out.pred, out.alpha);
  int masked_cur = op_mul_mask(t, cur, out.alpha);
  int mp_pad = op_pad_frame(t, masked_pred, out.dims);
  int mc_pad = op_pad_frame(t, masked_cur, out.dims);

  int recon_c;
  if (mode == SystemMode::residual_skip) {
    out.resid = model.residual.forward(t, bd, mp_pad, mc_pad, qmode, rng);
    out.has_resid = true;
    out.rate_c = out.resid.rate_bits;
    recon_c = out.resid.recon;
  } else {
    out.codec = model.codecnet.forward(t, bd, mp_pad, mc_pad, qmode, rng);
    out.has_codec = true;
    out.rate_c = out.codec.rate_bits;
    recon_c = out.codec.recon;
  }
  if (t.val(recon_c).dim(1) != h || t.val(recon_c).dim(2) != w)
    recon_c = op_crop(t, recon_c, 0, 0, h, w);

  int one_minus_alpha = op_add_scalar(t, op_scale(t, out.alpha, T(-1)), T(1));
  int skip_term = op_mul_mask(t, out.pred, one_minus_alpha);
  out.recon = op_clamp_ste(t, op_add(t, skip_term, recon_c), T(0), T(1));
  return out;
}

// ---------------------------------------------------------------------------
// Payload flattening orders.
// MOFNet main/hyper and CodecNet hyper payloads use the tensor's natural
// (channel, y, x) order. The CodecNet main payload is position-major
// ((y, x) outer, channel inner) to match the raster-serial context decoder.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<std::int32_t> symbols_natural(const Tensor<T>& q) {
  std::vector<std::int32_t> s(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) s[i] = static_cast<std::int32_t>(q[i]);
  return s;
}

template <typename T>
std::vector<double> values_natural(const Tensor<T>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
  return out;
}

template <typename T>
std::vector<std::int32_t> symbols_position_major(const Tensor<T>& q) {
  int c = q.dim(0), h = q.dim(1), w = q.dim(2);
  std::vector<std::int32_t> s(q.size());
  std::size_t k = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) s[k++] = static_cast<std::int32_t>(q.at3(ch, y, x));
  return s;
}

template <typename T>
std::vector<double> values_position_major(const Tensor<T>& v) {
  int c = v.dim(0), h = v.dim(1), w = v.dim(2);
  std::vector<double> out(v.size());
  std::size_t k = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out[k++] = static_cast<double>(v.at3(ch, y, x));
  return out;
}

// Serial raster decode of the context-modelled latents. Per-position
// arithmetic mirrors the tape ops bit for bit: masked_conv_at is the same
// routine the parallel encoder pass uses, and the 1x1 entropy-parameter head
// accumulates in the same channel order as conv2d_fwd.
template <typename T>
Tensor<T> ar_decode_latents(const ContextModel<T>& ctx, const EntropyParams<T>& ep,
                            const Tensor<T>& hyper_feat, int n, int lh, int lw,
                            const std::vector<std::uint8_t>& payload) {
  Tensor<T> y(shape3(n, lh, lw));
  if (payload.empty() && y.size() != 0)
    throw decode_error("context decoder: missing payload");
  LaplaceSeqDecoder dec(payload.data(), payload.size());
  const Tensor<T>& w1 = ep.c1.w;
  const Tensor<T>& b1 = ep.c1.b;
  const Tensor<T>& w2 = ep.c2.w;
  const Tensor<T>& b2 = ep.c2.b;
  int mid = w1.dim(0);        // 3n
  int in_ch = w1.dim(1);      // 4n
  int out_ch = w2.dim(0);     // 2n
  std::vector<T> ctx_out(static_cast<std::size_t>(2 * n));
  std::vector<T> ep_in(static_cast<std::size_t>(in_ch));
  std::vector<T> h1(static_cast<std::size_t>(mid));
  std::vector<T> h2(static_cast<std::size_t>(out_ch));
  std::size_t plane = static_cast<std::size_t>(lh) * lw;
  for (int yy = 0; yy < lh; ++yy)
    for (int xx = 0; xx < lw; ++xx) {
      masked_conv_at(y, ctx.conv.w, ctx.conv.b, yy, xx, ctx_out.data());
      std::size_t pix = static_cast<std::size_t>(yy) * lw + xx;
      for (int c = 0; c < 2 * n; ++c)
        ep_in[static_cast<std::size_t>(c)] = hyper_feat[static_cast<std::size_t>(c) * plane + pix];
      for (int c = 0; c < 2 * n; ++c) ep_in[static_cast<std::size_t>(2 * n + c)] = ctx_out[static_cast<std::size_t>(c)];
      for (int o = 0; o < mid; ++o) {
        T acc = b1[static_cast<std::size_t>(o)];
        const T* wrow = w1.ptr() + static_cast<std::size_t>(o) * in_ch;
        for (int k = 0; k < in_ch; ++k) {
          if (wrow[k] == T(0)) continue;
          acc += wrow[k] * ep_in[static_cast<std::size_t>(k)];
        }
        h1[static_cast<std::size_t>(o)] = acc >= T(0) ? acc : static_cast<T>(kLeakySlope) * acc;
      }
      for (int o = 0; o < out_ch; ++o) {
        T acc = b2[static_cast<std::size_t>(o)];
        const T* wrow = w2.ptr() + static_cast<std::size_t>(o) * mid;
        for (int k = 0; k < mid; ++k) {
          if (wrow[k] == T(0)) continue;
          acc += wrow[k] * h1[static_cast<std::size_t>(k)];
        }
        h2[static_cast<std::size_t>(o)] = acc;
      }
      for (int c = 0; c < n; ++c) {
        double mu = static_cast<double>(h2[static_cast<std::size_t>(c)]);
        double b = static_cast<double>(scale_from_raw(h2[static_cast<std::size_t>(n + c)]));
        y.at3(c, yy, xx) = static_cast<T>(dec.decode_one(mu, b));
      }
    }
  return y;
}

}  // namespace detail

// Per-pixel bit-allocation map: each latent cell's bits spread uniformly over
// its pixel footprint on the padded grid, cropped to the frame and rescaled so
// the map total equals the payload's estimated bits.
template <typename T>
Tensor<double> build_rate_map(const Tensor<T>& main_bits, const Tensor<T>& hyper_bits,
                              const LatentDims& d, int h, int w) {
  Tensor<double> padded(shape3(1, d.ph, d.pw), 0.0);
  auto spread = [&](const Tensor<T>& bits, int grid_h, int grid_w) {
    int fy = (d.ph + grid_h - 1) / grid_h;
    int fx = (d.pw + grid_w - 1) / grid_w;
    // coverage of each cell on the padded pixel grid
    for (int cy = 0; cy < grid_h; ++cy)
      for (int cx = 0; cx < grid_w; ++cx) {
        double cell = 0;
        for (int c = 0; c < bits.dim(0); ++c) cell += static_cast<double>(bits.at3(c, cy, cx));
        int y0 = cy * fy, x0 = cx * fx;
        int y1 = std::min(d.ph, y0 + fy), x1 = std::min(d.pw, x0 + fx);
        if (y0 >= y1 || x0 >= x1) continue;
        double per = cell / (static_cast<double>(y1 - y0) * (x1 - x0));
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) padded.at3(0, y, x) += per;
      }
  };
  spread(main_bits, main_bits.dim(1), main_bits.dim(2));
  spread(hyper_bits, hyper_bits.dim(1), hyper_bits.dim(2));
  double total = static_cast<double>(main_bits.sum()) + static_cast<double>(hyper_bits.sum());
  Tensor<double> map(shape3(1, h, w));
  double in_crop = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) in_crop += padded.at3(0, y, x);
  double scale = (in_crop > 0) ? total / in_crop : 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) map.at3(0, y, x) = padded.at3(0, y, x) * scale;
  return map;
}

template <typename T>
struct CodingResult {
  FrameT<T> recon;
  double rate_total = 0;  // estimated bits
  double rate_m = 0;
  double rate_c = 0;
  Tensor<T> alpha;
  Tensor<T> flow;
  Tensor<T> pred;
  Tensor<double> rate_map_mof;    // (1,H,W)
  Tensor<double> rate_map_codec;  // (1,H,W); zero in skip_only
};

struct RDPoint {
  double bpp = 0;
  double ms_ssim = 0;
  double ms_ssim_db = 0;
};

// ---------------------------------------------------------------------------
// encode / decode / evaluate
// ---------------------------------------------------------------------------

template <typename T>
std::pair<Bitstream, CodingResult<T>> encode_pframe(const FramePairT<T>& pair,
                                                    const PFrameModel<T>& model, SystemMode mode,
                                                    double lambda) {
  pair.validate();
  int h = pair.reference.height(), w = pair.reference.width();
  if (h > 65535 || w > 65535) throw dimension_error("encode: dimensions exceed header range");
  Tape<T> t;
  auto bd = bind_params_frozen(t, model.bank);
  Rng rng(0);  // eval path draws nothing
  int ref = t.leaf(pair.reference.data), cur = t.leaf(pair.current.data);
  auto nodes = forward_system(t, model, bd, ref, cur, mode, QuantMode::eval, rng);

  Bitstream bs;
  bs.lambda_index = lambda_index_for(lambda);
  bs.height = static_cast<std::uint16_t>(h);
  bs.width = static_cast<std::uint16_t>(w);

  // MOFNet hyper + main
  {
    const Tensor<T>& zq = t.val(nodes.mof.z_q);
    std::vector<double> mu, b;
    model.mofnet.zprior.coder_params(zq.dim(1), zq.dim(2), mu, b);
    bs.payloads[Bitstream::kMofHyper] = laplace_encode(detail::symbols_natural(zq), mu, b);
    bs.payloads[Bitstream::kMofMain] =
        laplace_encode(detail::symbols_natural(t.val(nodes.mof.y_q)),
                       detail::values_natural(t.val(nodes.mof.mu)),
                       detail::values_natural(t.val(nodes.mof.b)));
  }
  if (nodes.has_codec || nodes.has_resid) {
    int zn = nodes.has_codec ? nodes.codec.z_q : nodes.resid.z_q;
    int yn = nodes.has_codec ? nodes.codec.y_q : nodes.resid.y_q;
    int mun = nodes.has_codec ? nodes.codec.mu : nodes.resid.mu;
    int bn = nodes.has_codec ? nodes.codec.b : nodes.resid.b;
    const ChannelPrior<T>& prior =
        nodes.has_codec ? model.codecnet.zprior : model.residual.zprior;
    const Tensor<T>& zq = t.val(zn);
    std::vector<double> mu, b;
    prior.coder_params(zq.dim(1), zq.dim(2), mu, b);
    bs.payloads[Bitstream::kCodecHyper] = laplace_encode(detail::symbols_natural(zq), mu, b);
    bs.payloads[Bitstream::kCodecMain] =
        laplace_encode(detail::symbols_position_major(t.val(yn)),
                       detail::values_position_major(t.val(mun)),
                       detail::values_position_major(t.val(bn)));
  }

  CodingResult<T> res;
  res.recon = FrameT<T>(t.val(nodes.recon), pair.current.colorspace);
  res.rate_m = static_cast<double>(t.val(nodes.rate_m)[0]);
  res.rate_c = static_cast<double>(t.val(nodes.rate_c)[0]);
  res.rate_total = res.rate_m + res.rate_c;
  res.alpha = t.val(nodes.alpha);
  res.flow = t.val(nodes.flow);
  res.pred = t.val(nodes.pred);
  res.rate_map_mof =
      build_rate_map(t.val(nodes.mof.y_bits), t.val(nodes.mof.z_bits), nodes.dims, h, w);
  if (nodes.has_codec)
    res.rate_map_codec =
        build_rate_map(t.val(nodes.codec.y_bits), t.val(nodes.codec.z_bits), nodes.dims, h, w);
  else if (nodes.has_resid)
    res.rate_map_codec =
        build_rate_map(t.val(nodes.resid.y_bits), t.val(nodes.resid.z_bits), nodes.dims, h, w);
  else
    res.rate_map_codec = Tensor<double>(shape3(1, h, w), 0.0);
  return {std::move(bs), std::move(res)};
}

template <typename T>
FrameT<T> decode_pframe(const FrameT<T>& reference, const Bitstream& bs,
                        const PFrameModel<T>& model, SystemMode mode) {
  int h = bs.height, w = bs.width;
  if (reference.height() != h || reference.width() != w)
    throw format_error("decode: reference dimensions disagree with header");
  LatentDims d = latent_dims_for(h, w);
  Tape<T> t;
  auto bd = bind_params_frozen(t, model.bank);
  int ref = t.leaf(reference.data);
  int ref_pad = op_pad_frame(t, ref, d);
  (void)ref_pad;

  // ---- MOFNet side
  const Mofnet<T>& mof = model.mofnet;
  Tensor<T> z_hat(shape3(model.widths.m, d.hh, d.hw));
  {
    std::vector<double> mu, b;
    mof.zprior.coder_params(d.hh, d.hw, mu, b);
    auto sym = laplace_decode(bs.payloads[Bitstream::kMofHyper].data(),
                              bs.payloads[Bitstream::kMofHyper].size(), mu, b);
    for (std::size_t i = 0; i < sym.size(); ++i) z_hat[i] = static_cast<T>(sym[i]);
  }
  int z_node = t.leaf(z_hat);
  int feat = mof.hd.forward(t, bd, z_node, d.lh, d.lw);
  int mu_node = op_slice_ch(t, feat, 0, model.widths.n);
  int b_node = op_scale_from_raw(t, op_slice_ch(t, feat, model.widths.n, 2 * model.widths.n));
  Tensor<T> y_hat(shape3(model.widths.n, d.lh, d.lw));
  {
    auto sym = laplace_decode(bs.payloads[Bitstream::kMofMain].data(),
                              bs.payloads[Bitstream::kMofMain].size(),
                              detail::values_natural(t.val(mu_node)),
                              detail::values_natural(t.val(b_node)));
    for (std::size_t i = 0; i < sym.size(); ++i) y_hat[i] = static_cast<T>(sym[i]);
  }
  int y_node = t.leaf(y_hat);
  int out = mof.s4.forward(
      t, bd, mof.s3.forward(t, bd, mof.s2.forward(t, bd, mof.s1.forward(t, bd, y_node))));
  if (t.val(out).dim(1) != h || t.val(out).dim(2) != w) out = op_crop(t, out, 0, 0, h, w);
  int flow = op_slice_ch(t, out, 0, 2);
  int alpha;
  if (mode == SystemMode::skip_only)
    alpha = t.leaf(Tensor<T>(shape3(1, h, w), T(0)));
  else if (mode == SystemMode::codecnet_only)
    alpha = t.leaf(Tensor<T>(shape3(1, h, w), T(1)));
  else
    alpha = op_clip_alpha(t, op_slice_ch(t, out, 2, 3));

  int pred = op_bilinear_warp(t, ref, flow);
  if (mode == SystemMode::skip_only) {
    int recon = op_clamp(t, pred, T(0), T(1));
    return FrameT<T>(t.val(recon), reference.colorspace);
  }

  // ---- conditional / residual side
  int masked_pred = op_mul_mask(t, pred, alpha);
  int mp_pad = op_pad_frame(t, masked_pred, d);

  Tensor<T> cz_hat(shape3(model.codec_widths.m, d.hh, d.hw));
  const ChannelPrior<T>& prior =
      mode == SystemMode::residual_skip ? model.residual.zprior : model.codecnet.zprior;
  {
    std::vector<double> mu, b;
    prior.coder_params(d.hh, d.hw, mu, b);
    auto sym = laplace_decode(bs.payloads[Bitstream::kCodecHyper].data(),
                              bs.payloads[Bitstream::kCodecHyper].size(), mu, b);
    for (std::size_t i = 0; i < sym.size(); ++i) cz_hat[i] = static_cast<T>(sym[i]);
  }
  int cz_node = t.leaf(cz_hat);

  int recon_c;
  if (mode == SystemMode::residual_skip) {
    int hyper_feat = model.residual.hyper_features(t, bd, cz_node, d.lh, d.lw);
    Tensor<T> y_cur = detail::ar_decode_latents(model.residual.ctx, model.residual.ep,
                                                t.val(hyper_feat), model.codec_widths.n, d.lh, d.lw,
                                                bs.payloads[Bitstream::kCodecMain]);
    int resid = model.residual.synthesize(t, bd, t.leaf(y_cur));
    recon_c = op_add(t, mp_pad, resid);
  } else {
    int y_pred = model.codecnet.pred_latents(t, bd, mp_pad);
    int hyper_feat = model.codecnet.hyper_features(t, bd, cz_node, d.lh, d.lw);
    Tensor<T> y_cur = detail::ar_decode_latents(model.codecnet.ctx, model.codecnet.ep,
                                                t.val(hyper_feat), model.codec_widths.n, d.lh, d.lw,
                                                bs.payloads[Bitstream::kCodecMain]);
    recon_c = model.codecnet.synthesize(t, bd, t.leaf(y_cur), y_pred);
  }
  if (t.val(recon_c).dim(1) != h || t.val(recon_c).dim(2) != w)
    recon_c = op_crop(t, recon_c, 0, 0, h, w);

  int one_minus_alpha = op_add_scalar(t, op_scale(t, alpha, T(-1)), T(1));
  int skip_term = op_mul_mask(t, pred, one_minus_alpha);
  int recon = op_clamp(t, op_add(t, skip_term, recon_c), T(0), T(1));
  return FrameT<T>(t.val(recon), reference.colorspace);
}

template <typename T>
RDPoint evaluate_pair(const FramePairT<T>& pair, const PFrameModel<T>& model, SystemMode mode) {
  pair.validate();
  int h = pair.reference.height(), w = pair.reference.width();
  Tape<T> t;
  auto bd = bind_params_frozen(t, model.bank);
  Rng rng(0);
  int ref = t.leaf(pair.reference.data), cur = t.leaf(pair.current.data);
  auto nodes = forward_system(t, model, bd, ref, cur, mode, QuantMode::eval, rng);
  RDPoint p;
  double bits =
      static_cast<double>(t.val(nodes.rate_m)[0]) + static_cast<double>(t.val(nodes.rate_c)[0]);
  p.bpp = bits / (static_cast<double>(h) * w);
  p.ms_ssim = static_cast<double>(ms_ssim(t.val(nodes.recon), pair.current.data));
  p.ms_ssim_db = ms_ssim_db(p.ms_ssim);
  return p;
}

}  // namespace mofc
