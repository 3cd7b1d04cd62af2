// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mofc/msssim.hpp"
#include "mofc/ops_conv.hpp"
#include "mofc/ops_gdn.hpp"
#include "mofc/ops_rate.hpp"
#include "mofc/ops_warp.hpp"

using namespace mofc;
using mofc::test::gradcheck;
using mofc::test::random_tensor;

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(11);
  auto a = random_tensor(shape3(2, 3, 4), rng, 0.2, 1.5);
  auto b = random_tensor(shape3(2, 3, 4), rng, 0.3, 1.2);
  double err = gradcheck({a, b}, [](Tape<double>& t, const std::vector<int>& in) {
    int s = op_add(t, op_mul(t, in[0], in[1]), op_div(t, in[0], in[1]));
    int e = op_exp(t, op_scale(t, in[0], 0.3));
    int l = op_log(t, op_add_scalar(t, op_mul(t, in[1], in[1]), 0.5));
    return op_mean(t, op_add(t, s, op_add(t, e, l)));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("leaky relu, clamp, structural ops") {
  Rng rng(12);
  auto a = random_tensor(shape3(3, 5, 6), rng);
  auto m = random_tensor(shape3(1, 5, 6), rng, 0.1, 0.9);
  double err = gradcheck({a, m}, [](Tape<double>& t, const std::vector<int>& in) {
    int x = op_leaky_relu(t, in[0], 0.01);
    x = op_mul_mask(t, x, in[1]);
    int p = op_pad_symmetric(t, x, 2, 1, 3, 2);
    int crop = op_crop(t, p, 1, 2, 5, 6);
    int cat = op_concat_ch(t, crop, in[0]);
    int sl = op_slice_ch(t, cat, 1, 4);
    int cl = op_clamp(t, sl, -0.4, 0.6);
    return op_add(t, op_mean(t, cl), op_mean(t, op_avg_pool2(t, sl)));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("conv2d forward shapes and gradients") {
  Rng rng(13);
  auto x = random_tensor(shape3(3, 9, 10), rng);
  auto w = random_tensor(shape4(4, 3, 5, 5), rng, -0.3, 0.3);
  auto b = random_tensor(shape1(4), rng, -0.2, 0.2);

  SUBCASE("stride 2 halves dims with ceil") {
    Tape<double> t;
    int y = op_conv2d(t, t.leaf(x), t.leaf(w), t.leaf(b), 2, 2);
    CHECK(t.val(y).dims == shape3(4, 5, 5));
  }
  SUBCASE("gradients") {
    double err = gradcheck({x, w, b}, [](Tape<double>& t, const std::vector<int>& in) {
      int y = op_conv2d(t, in[0], in[1], in[2], 2, 2);
      return op_mean(t, op_mul(t, y, y));
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("transposed conv restores stride-2 dims and backpropagates") {
  Rng rng(14);
  auto x = random_tensor(shape3(4, 5, 6), rng);
  auto w = random_tensor(shape4(4, 3, 5, 5), rng, -0.3, 0.3);
  auto b = random_tensor(shape1(3), rng, -0.2, 0.2);
  SUBCASE("shape") {
    Tape<double> t;
    int y = op_tconv2d(t, t.leaf(x), t.leaf(w), t.leaf(b), 2, 2, 10, 12);
    CHECK(t.val(y).dims == shape3(3, 10, 12));
  }
  SUBCASE("gradients") {
    double err = gradcheck({x, w, b}, [](Tape<double>& t, const std::vector<int>& in) {
      int y = op_tconv2d(t, in[0], in[1], in[2], 2, 2, 10, 12);
      return op_mean(t, op_mul(t, y, y));
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("analysis/synthesis stride-2 stack is shape-inverse for x16 dims") {
  Rng rng(15);
  auto x = random_tensor(shape3(1, 32, 48), rng);
  Tape<double> t;
  int cur = t.leaf(x);
  std::vector<int> ws, bs;
  int chans = 1;
  for (int s = 0; s < 4; ++s) {
    ws.push_back(t.leaf(random_tensor(shape4(2, chans, 5, 5), rng, -0.2, 0.2)));
    bs.push_back(t.leaf(random_tensor(shape1(2), rng)));
    cur = op_conv2d(t, cur, ws.back(), bs.back(), 2, 2);
    chans = 2;
  }
  CHECK(t.val(cur).dims == shape3(2, 2, 3));
  for (int s = 0; s < 4; ++s) {
    int wt = t.leaf(random_tensor(shape4(2, 2, 5, 5), rng, -0.2, 0.2));
    int bt = t.leaf(random_tensor(shape1(2), rng));
    cur = op_tconv2d(t, cur, wt, bt, 2, 2, t.val(cur).dim(1) * 2, t.val(cur).dim(2) * 2);
  }
  CHECK(t.val(cur).dim(1) == 32);
  CHECK(t.val(cur).dim(2) == 48);
}

TEST_CASE("masked conv is causal in raster order") {
  Rng rng(16);
  auto x = random_tensor(shape3(2, 6, 7), rng);
  auto w = random_tensor(shape4(3, 2, 5, 5), rng, -0.4, 0.4);
  auto b = random_tensor(shape1(3), rng);
  Tensor<double> y0 = masked_conv_fwd(x, w, b);

  // perturb at position p: outputs at raster positions <= p unchanged
  int py = 3, px = 4;
  auto x2 = x;
  x2.at3(1, py, px) += 0.7;
  Tensor<double> y1 = masked_conv_fwd(x2, w, b);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 7; ++xx) {
        bool before_or_at = (y < py) || (y == py && xx <= px);
        if (before_or_at) CHECK(y1.at3(c, y, xx) == y0.at3(c, y, xx));
      }

  SUBCASE("all-zero input gives bias-only output") {
    Tensor<double> z(shape3(2, 6, 7));
    Tensor<double> yb = masked_conv_fwd(z, w, b);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 42; ++i) CHECK(yb[c * 42 + i] == doctest::Approx(b[c]));
  }
  SUBCASE("1x1 masked kernel ignores the input entirely") {
    auto w1 = random_tensor(shape4(3, 2, 1, 1), rng);
    Tensor<double> ya = masked_conv_fwd(x, w1, b);
    Tensor<double> yb = masked_conv_fwd(x2, w1, b);
    for (std::size_t i = 0; i < ya.size(); ++i) {
      CHECK(ya[i] == yb[i]);
      CHECK(ya[i] == doctest::Approx(b[i / 42]));
    }
  }
  SUBCASE("gradients") {
    double err = gradcheck({x, w, b}, [](Tape<double>& t, const std::vector<int>& in) {
      int y = op_masked_conv(t, in[0], in[1], in[2]);
      return op_mean(t, op_mul(t, y, y));
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("gdn closed forms") {
  SUBCASE("gamma=0 beta=1 is identity") {
    Tensor<double> x(shape3(2, 2, 2));
    Rng rng(17);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    Tensor<double> beta(shape1(2), 1.0);
    Tensor<double> gamma(shape2(2, 2), 0.0);
    auto y = gdn_eval(x, beta, gamma, false);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
  }
  SUBCASE("scalar channel closed form at the beta clamp") {
    Tensor<double> x(shape3(1, 1, 1));
    x[0] = 2.0;
    Tensor<double> beta(shape1(1), 0.0);  // clamps to 1e-6
    Tensor<double> gamma(shape2(1, 1), 1.0);
    auto y = gdn_eval(x, beta, gamma, false);
    CHECK(y[0] == doctest::Approx(2.0 / std::sqrt(1e-6 + 4.0)).epsilon(1e-9));
  }
  SUBCASE("fixed-point inverse recovers the input") {
    Rng rng(18);
    auto x = random_tensor(shape3(3, 4, 5), rng, -1.5, 1.5);
    Tensor<double> beta(shape1(3), 0.7);
    Tensor<double> gamma(shape2(3, 3), 0.05);
    for (int i = 0; i < 3; ++i) gamma.at2(i, i) = 0.2;
    auto y = gdn_eval(x, beta, gamma, false);
    auto back = gdn_invert(y, beta, gamma);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(back[i] - x[i]) < 1e-5);
  }
  SUBCASE("gradients, both directions") {
    Rng rng(19);
    auto x = random_tensor(shape3(3, 3, 4), rng, -1.2, 1.2);
    auto beta = random_tensor(shape1(3), rng, 0.4, 1.3);
    auto gamma = random_tensor(shape2(3, 3), rng, 0.02, 0.3);
    for (bool inv : {false, true}) {
      double err = gradcheck({x, beta, gamma}, [inv](Tape<double>& t, const std::vector<int>& in) {
        int y = op_gdn(t, in[0], in[1], in[2], inv);
        return op_mean(t, op_mul(t, y, y));
      });
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("bilinear warp identities and oracle") {
  int H = 12, W = 16;
  Rng rng(20);
  auto ref = random_tensor(shape3(3, H, W), rng, 0.0, 1.0);

  SUBCASE("zero flow is bit-exact identity") {
    Tensor<double> flow(shape3(2, H, W), 0.0);
    auto out = bilinear_warp_eval(ref, flow);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out[i] == ref[i]);
  }
  SUBCASE("integer shift on a ramp") {
    Tensor<double> ramp(shape3(1, H, W));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) ramp.at3(0, y, x) = static_cast<double>(x) / W;
    Tensor<double> flow(shape3(2, H, W), 0.0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) flow.at3(0, y, x) = 1.0;
    auto out = bilinear_warp_eval(ramp, flow);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x + 1 < W; ++x)
        CHECK(out.at3(0, y, x) == doctest::Approx((x + 1.0) / W).epsilon(1e-12));
  }
  SUBCASE("half-pixel shift is exact on affine images") {
    Tensor<double> ramp(shape3(1, H, W));
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) ramp.at3(0, y, x) = static_cast<double>(x) / W;
    Tensor<double> flow(shape3(2, H, W), 0.0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) flow.at3(0, y, x) = 0.5;
    auto out = bilinear_warp_eval(ramp, flow);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x + 1 < W; ++x)
        CHECK(out.at3(0, y, x) == doctest::Approx((x + 0.5) / W).epsilon(1e-12));
  }
  SUBCASE("brute-force oracle agreement on random cases") {
    // independent per-pixel oracle, written directly from the definition
    auto oracle = [](const Tensor<double>& r, const Tensor<double>& f, int c, int y, int x) {
      double sx = x + f.at3(0, y, x), sy = y + f.at3(1, y, x);
      int Wd = r.dim(2), Hd = r.dim(1);
      double fx = sx - std::floor(sx), fy = sy - std::floor(sy);
      auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
      int x0 = cl(static_cast<int>(std::floor(sx)), Wd - 1);
      int x1 = cl(static_cast<int>(std::floor(sx)) + 1, Wd - 1);
      int y0 = cl(static_cast<int>(std::floor(sy)), Hd - 1);
      int y1 = cl(static_cast<int>(std::floor(sy)) + 1, Hd - 1);
      return (1 - fy) * ((1 - fx) * r.at3(c, y0, x0) + fx * r.at3(c, y0, x1)) +
             fy * ((1 - fx) * r.at3(c, y1, x0) + fx * r.at3(c, y1, x1));
    };
    Rng r2(21);
    for (int trial = 0; trial < 20; ++trial) {
      auto fr = random_tensor(shape3(3, H, W), r2, 0.0, 1.0);
      auto fl = random_tensor(shape3(2, H, W), r2, -5.0, 5.0);
      auto out = bilinear_warp_eval(fr, fl);
      double worst = 0;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x)
            worst = std::max(worst, std::abs(out.at3(c, y, x) - oracle(fr, fl, c, y, x)));
      CHECK(worst < 1e-12);
    }
  }
  SUBCASE("range preservation") {
    Rng r3(22);
    auto fl = random_tensor(shape3(2, H, W), r3, -8.0, 8.0);
    auto out = bilinear_warp_eval(ref, fl);
    CHECK(out.min_value() >= ref.min_value() - 1e-12);
    CHECK(out.max_value() <= ref.max_value() + 1e-12);
  }
  SUBCASE("gradients w.r.t. frame and flow") {
    Rng r4(23);
    auto fr = random_tensor(shape3(2, 8, 9), r4, 0.0, 1.0);
    // keep flow away from integer-coordinate kinks
    Tensor<double> fl(shape3(2, 8, 9));
    for (auto& v : fl.data) v = r4.uniform(-2.0, 2.0) + 0.31;
    double err = gradcheck({fr, fl}, [](Tape<double>& t, const std::vector<int>& in) {
      int y = op_bilinear_warp(t, in[0], in[1]);
      return op_mean(t, op_mul(t, y, y));
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("quantizer contracts") {
  Rng rng(24);
  SUBCASE("eval rounding: half away from zero") {
    Tensor<double> x(shape1(6));
    x.data = {1.4, -1.5, 1.5, -1.4, 2.0, -3.0};
    auto q = quantize(x, QuantMode::eval);
    CHECK(q[0] == 1.0);
    CHECK(q[1] == -2.0);
    CHECK(q[2] == 2.0);
    CHECK(q[3] == -1.0);
    CHECK(q[4] == 2.0);
    CHECK(q[5] == -3.0);
  }
  SUBCASE("train mode stays within half-step of the input") {
    auto x = random_tensor(shape3(2, 5, 5), rng, -4, 4);
    auto q = quantize(x, QuantMode::train, &rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(q[i] - x[i] >= -0.5);
      CHECK(q[i] - x[i] < 0.5);
    }
  }
  SUBCASE("integers are fixed points of eval rounding") {
    Tensor<double> x(shape1(5));
    x.data = {-3, -1, 0, 2, 7};
    auto q = quantize(x, QuantMode::eval);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(q[i] == x[i]);
  }
}

TEST_CASE("laplace rate analytic values") {
  SUBCASE("q=0 mu=0 b=1") {
    double bits = laplace_bits_scalar(0.0, 0.0, 1.0);
    double p = 1.0 - std::exp(-0.5);
    CHECK(bits == doctest::Approx(-std::log2(p)).epsilon(1e-12));
    CHECK(p == doctest::Approx(0.393469).epsilon(1e-5));
    CHECK(bits == doctest::Approx(1.3456).epsilon(1e-3));
  }
  SUBCASE("shift invariance") {
    CHECK(laplace_bits_scalar(3.0, 3.0, 0.7) ==
          doctest::Approx(laplace_bits_scalar(0.0, 0.0, 0.7)).epsilon(1e-12));
  }
  SUBCASE("probabilities telescope to one") {
    Rng rng(25);
    for (int trial = 0; trial < 30; ++trial) {
      double mu = rng.uniform(-4, 4), b = rng.uniform(0.05, 8.0);
      double total = 0;
      for (int q = -2200; q <= 2200; ++q) {
        double z0 = (q - 0.5 - mu) / b, z1 = (q + 0.5 - mu) / b;
        total += detail::laplace_interval_prob(z0, z1);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("monotone in scale at the mode") {
    double prev = laplace_bits_scalar(0.0, 0.0, 4.0);
    for (double b : {2.0, 1.0, 0.5, 0.25, 0.1}) {
      double cur = laplace_bits_scalar(0.0, 0.0, b);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  SUBCASE("gradients of the bits tensor") {
    Rng rng(26);
    auto q = random_tensor(shape3(1, 4, 5), rng, -2, 2);
    auto mu = random_tensor(shape3(1, 4, 5), rng, -1, 1);
    auto b = random_tensor(shape3(1, 4, 5), rng, 0.3, 2.0);
    double err = gradcheck({q, mu, b}, [](Tape<double>& t, const std::vector<int>& in) {
      return op_sum(t, op_laplace_bits(t, in[0], in[1], in[2]));
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("ms-ssim basic properties") {
  Rng rng(27);
  auto mk = [&](int h, int w) {
    auto t = random_tensor(shape3(3, h, w), rng, 0.0, 1.0);
    return t;
  };
  SUBCASE("self similarity") {
    auto a = mk(96, 128);
    CHECK(std::abs(ms_ssim(a, a) - 1.0) < 1e-8);
  }
  SUBCASE("symmetry") {
    auto a = mk(64, 64);
    auto b = mk(64, 64);
    CHECK(ms_ssim(a, b) == doctest::Approx(ms_ssim(b, a)).epsilon(1e-10));
  }
  SUBCASE("monotone degradation under growing noise") {
    auto a = mk(64, 96);
    double prev = 1.0;
    for (double sigma : {0.01, 0.05, 0.1}) {
      Rng nr(99);  // same noise shape, growing amplitude
      auto b = a;
      for (auto& v : b.data) v = clamp_val(v + sigma * nr.normal(), 0.0, 1.0);
      double s = ms_ssim(a, b);
      CHECK(s < prev);
      prev = s;
    }
  }
  SUBCASE("db transform") {
    CHECK(ms_ssim_db(0.9) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(ms_ssim_db(0.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(ms_ssim_db(0.982) == doctest::Approx(17.447).epsilon(1e-4));
    CHECK(ms_ssim_db(1.0) == doctest::Approx(80.0).epsilon(1e-9));
  }
  SUBCASE("gradients flow through the metric") {
    Rng r2(28);
    auto a = random_tensor(shape3(1, 16, 16), r2, 0.1, 0.9);
    auto b = random_tensor(shape3(1, 16, 16), r2, 0.1, 0.9);
    double err = gradcheck({a, b}, [](Tape<double>& t, const std::vector<int>& in) {
      return op_ms_ssim(t, in[0], in[1]);
    });
    CHECK(err < 1e-4);
  }
}
