// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Byte-oriented range coder with carry propagation through a cache byte
// (the classic LZMA arrangement: 64-bit low, 32-bit range, 16-bit symbol
// frequencies). Encoder and decoder work purely on integer state, so a
// stream is decodable by any build that encodes it.

inline constexpr int kRcProbBits = 16;
inline constexpr std::uint32_t kRcProbTotal = 1u << kRcProbBits;
inline constexpr std::uint32_t kRcTopBound = 1u << 24;

class RangeEncoder {
 public:
  // cum_lo/cum_hi: the symbol's CDF slice in [0, kRcProbTotal]
  void encode(std::uint32_t cum_lo, std::uint32_t cum_hi) {
    range_ >>= kRcProbBits;
    low_ += cum_lo * static_cast<std::uint64_t>(range_);
    range_ *= cum_hi - cum_lo;
    while (range_ < kRcTopBound) {
      shift_low();
      range_ <<= 8;
    }
  }

  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
      do {
        out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
        cache_ = 0xFF;
      } while (--pending_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++pending_;
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {
    next_byte();  // the encoder's initial cache byte
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  // Returns a value in [0, kRcProbTotal); caller locates the symbol whose CDF
  // slice contains it and then calls consume().
  std::uint32_t decode_target() {
    range_ >>= kRcProbBits;
    std::uint32_t t = code_ / range_;
    return t >= kRcProbTotal ? kRcProbTotal - 1 : t;
  }

  void consume(std::uint32_t cum_lo, std::uint32_t cum_hi) {
    code_ -= cum_lo * range_;
    range_ *= cum_hi - cum_lo;
    while (range_ < kRcTopBound) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

 private:
  std::uint8_t next_byte() {
    if (pos_ >= size_) throw decode_error("range decoder: stream exhausted");
    return data_[pos_++];
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace mofc
