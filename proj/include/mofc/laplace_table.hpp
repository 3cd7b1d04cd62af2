// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mofc/ops_rate.hpp"
#include "mofc/range_coder.hpp"
#include "mofc/tensor.hpp"

namespace mofc {

// Fixed-point CDF over an integer symbol support derived from Laplace(mu, b).
//
// Support is [round(mu) - halfwidth, round(mu) + halfwidth] with
// halfwidth = ceil(64 b); the two end buckets absorb the tail mass, every
// bucket gets frequency >= 1, and the total is exactly 2^16. The construction
// is a pure function of (mu, b), so encoder and decoder sides always build
// identical tables from identical network outputs.
struct LaplaceCdf {
  std::int32_t smin = 0;
  std::int32_t smax = 0;
  std::vector<std::uint32_t> cum;  // size count+1; cum[0]=0, cum[count]=2^16

  int count() const { return static_cast<int>(cum.size()) - 1; }

  std::int32_t clamp_symbol(std::int32_t s) const { return clamp_val(s, smin, smax); }
};

namespace detail {

inline double laplace_cdf_std(double z) {
  return z < 0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

}  // namespace detail

inline LaplaceCdf build_laplace_cdf(double mu, double b) {
  b = clamp_val(b, kScaleMin, kScaleMax);
  std::int32_t center = round_half_away(mu);
  int halfw = std::max(1, static_cast<int>(std::ceil(64.0 * b)));
  LaplaceCdf t;
  t.smin = center - halfw;
  t.smax = center + halfw;
  int count = 2 * halfw + 1;

  std::vector<double> pmf(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::int32_t s = t.smin + i;
    double lo = (i == 0) ? 0.0 : detail::laplace_cdf_std((s - 0.5 - mu) / b);
    double hi = (i == count - 1) ? 1.0 : detail::laplace_cdf_std((s + 0.5 - mu) / b);
    pmf[static_cast<std::size_t>(i)] = std::max(hi - lo, 0.0);
  }

  // quantize to 16-bit total, every bucket >= 1
  std::vector<std::uint32_t> freq(static_cast<std::size_t>(count));
  std::uint64_t total = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    freq[i] = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(pmf[i] * static_cast<double>(kRcProbTotal)));
    total += freq[i];
    if (pmf[i] > pmf[largest]) largest = i;
  }
  if (total < kRcProbTotal) {
    freq[largest] += static_cast<std::uint32_t>(kRcProbTotal - total);
  } else if (total > kRcProbTotal) {
    std::uint64_t excess = total - kRcProbTotal;
    // shave from the largest buckets first, never below 1
    while (excess > 0) {
      std::size_t big = 0;
      for (std::size_t i = 1; i < freq.size(); ++i)
        if (freq[i] > freq[big]) big = i;
      std::uint32_t take =
          static_cast<std::uint32_t>(std::min<std::uint64_t>(excess, freq[big] - 1));
      if (take == 0) throw contract_error("laplace cdf: cannot normalize");
      freq[big] -= take;
      excess -= take;
    }
  }

  t.cum.resize(static_cast<std::size_t>(count) + 1);
  t.cum[0] = 0;
  for (int i = 0; i < count; ++i) t.cum[static_cast<std::size_t>(i) + 1] = t.cum[static_cast<std::size_t>(i)] + freq[static_cast<std::size_t>(i)];
  return t;
}

// ---------------------------------------------------------------------------
// Payload codec: arrays of integer symbols against per-element (mu, b).
// ---------------------------------------------------------------------------

// Per-element parameters; mu/b row-major aligned with the symbol array.
template <typename T>
std::vector<std::uint8_t> laplace_encode(const std::vector<std::int32_t>& symbols,
                                         const std::vector<T>& mu, const std::vector<T>& b) {
  if (symbols.size() != mu.size() || symbols.size() != b.size())
    throw dimension_error("laplace_encode: parameter arrays misaligned");
  if (symbols.empty()) return {};
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    LaplaceCdf t = build_laplace_cdf(static_cast<double>(mu[i]), static_cast<double>(b[i]));
    std::int32_t s = t.clamp_symbol(symbols[i]);
    std::size_t idx = static_cast<std::size_t>(s - t.smin);
    enc.encode(t.cum[idx], t.cum[idx + 1]);
  }
  return enc.finish();
}

template <typename T>
std::vector<std::int32_t> laplace_decode(const std::uint8_t* data, std::size_t size,
                                         const std::vector<T>& mu, const std::vector<T>& b) {
  if (mu.size() != b.size()) throw dimension_error("laplace_decode: parameter arrays misaligned");
  std::vector<std::int32_t> out(mu.size());
  if (mu.empty()) return out;
  RangeDecoder dec(data, size);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    LaplaceCdf t = build_laplace_cdf(static_cast<double>(mu[i]), static_cast<double>(b[i]));
    std::uint32_t target = dec.decode_target();
    // binary search: largest idx with cum[idx] <= target
    const auto& c = t.cum;
    std::size_t lo = 0, hi = c.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (c[mid] <= target)
        lo = mid;
      else
        hi = mid;
    }
    dec.consume(c[lo], c[lo + 1]);
    out[i] = t.smin + static_cast<std::int32_t>(lo);
  }
  return out;
}

// Sequential decoder for the autoregressive path: parameters arrive one
// element at a time.
class LaplaceSeqDecoder {
 public:
  LaplaceSeqDecoder(const std::uint8_t* data, std::size_t size) : dec_(data, size) {}

  std::int32_t decode_one(double mu, double b) {
    LaplaceCdf t = build_laplace_cdf(mu, b);
    std::uint32_t target = dec_.decode_target();
    const auto& c = t.cum;
    std::size_t lo = 0, hi = c.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (c[mid] <= target)
        lo = mid;
      else
        hi = mid;
    }
    dec_.consume(c[lo], c[lo + 1]);
    return t.smin + static_cast<std::int32_t>(lo);
  }

 private:
  RangeDecoder dec_;
};

}  // namespace mofc
