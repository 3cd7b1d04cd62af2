// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mofc/msssim.hpp"
#include "mofc/tape.hpp"

namespace mofc {

// L(lambda) = (1 - MS-SSIM(recon, cur)) + lambda * (R_m + R_c) / pixels

template <typename T>
struct LossNodes {
  int loss = -1;     // scalar
  int ms_ssim = -1;  // scalar
  int bpp = -1;      // scalar
};

template <typename T>
LossNodes<T> op_rd_loss(Tape<T>& t, int recon, int cur, int rate_m, int rate_c, double lambda,
                        std::size_t pixels) {
  LossNodes<T> n;
  n.ms_ssim = op_ms_ssim(t, recon, cur);
  int distortion = op_add_scalar(t, op_scale(t, n.ms_ssim, T(-1)), T(1));
  n.bpp = op_scale(t, op_add(t, rate_m, rate_c), static_cast<T>(1.0 / static_cast<double>(pixels)));
  n.loss = op_add(t, distortion, op_scale(t, n.bpp, static_cast<T>(lambda)));
  return n;
}

inline double rd_loss_from_distortion(double distortion, double rate_m_bits, double rate_c_bits,
                                      double lambda, std::size_t pixels) {
  return distortion + lambda * (rate_m_bits + rate_c_bits) / static_cast<double>(pixels);
}

template <typename T>
double rd_loss(const Tensor<T>& recon, const Tensor<T>& current, double rate_m_bits,
               double rate_c_bits, double lambda, std::size_t pixels) {
  double d = 1.0 - static_cast<double>(ms_ssim(recon, current));
  return rd_loss_from_distortion(d, rate_m_bits, rate_c_bits, lambda, pixels);
}

}  // namespace mofc
