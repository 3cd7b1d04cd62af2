// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Coded-frame container. Layout, all integers big-endian:
//   magic "MOFC" | version u8 | lambda-index u8 | H u16 | W u16 |
//   4x payload length u32 | payloads (MOFNet hyper, MOFNet main,
//                                     CodecNet hyper, CodecNet main)
struct Bitstream {
  std::uint8_t version = 1;
  std::uint8_t lambda_index = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::array<std::vector<std::uint8_t>, 4> payloads;  // fixed slot order

  static constexpr std::array<char, 4> kMagic = {'M', 'O', 'F', 'C'};
  enum Slot { kMofHyper = 0, kMofMain = 1, kCodecHyper = 2, kCodecMain = 3 };

  std::size_t payload_bytes() const {
    std::size_t n = 0;
    for (const auto& p : payloads) n += p.size();
    return n;
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(28 + payload_bytes());
    for (char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(version);
    out.push_back(lambda_index);
    push_u16(out, height);
    push_u16(out, width);
    for (const auto& p : payloads) push_u32(out, static_cast<std::uint32_t>(p.size()));
    for (const auto& p : payloads) out.insert(out.end(), p.begin(), p.end());
    return out;
  }

  static Bitstream parse(const std::uint8_t* data, std::size_t size) {
    if (size < 26) throw decode_error("bitstream: truncated header");
    for (int i = 0; i < 4; ++i)
      if (data[i] != static_cast<std::uint8_t>(kMagic[static_cast<std::size_t>(i)]))
        throw decode_error("bitstream: bad magic");
    Bitstream bs;
    bs.version = data[4];
    if (bs.version != 1) throw decode_error("bitstream: unsupported version");
    bs.lambda_index = data[5];
    bs.height = read_u16(data + 6);
    bs.width = read_u16(data + 8);
    std::size_t off = 10;
    std::array<std::uint32_t, 4> lens{};
    for (auto& l : lens) {
      l = read_u32(data + off);
      off += 4;
    }
    for (int i = 0; i < 4; ++i) {
      if (off + lens[static_cast<std::size_t>(i)] > size)
        throw decode_error("bitstream: payload extends past end of stream");
      bs.payloads[static_cast<std::size_t>(i)].assign(data + off,
                                                      data + off + lens[static_cast<std::size_t>(i)]);
      off += lens[static_cast<std::size_t>(i)];
    }
    if (off != size) throw decode_error("bitstream: trailing bytes after payloads");
    return bs;
  }

  static Bitstream parse(const std::vector<std::uint8_t>& buf) {
    return parse(buf.data(), buf.size());
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    auto buf = serialize();
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw io_error("short write: " + path);
  }

  static Bitstream load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    return parse(buf);
  }

 private:
  static void push_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
  }
  static void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
  }
  static std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  }
  static std::uint32_t read_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
  }
};

// Shipped table of trained lambda operating points; the header's lambda-index
// refers to the nearest entry.
inline constexpr std::array<double, 12> kLambdaTable = {
    1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3, 1e-2, 2.5e-2, 5e-2, 0.1, 0.25, 1.0};

inline std::uint8_t lambda_index_for(double lambda) {
  std::size_t best = 0;
  double bestd = 1e300;
  for (std::size_t i = 0; i < kLambdaTable.size(); ++i) {
    double d = std::abs(std::log(kLambdaTable[i]) - std::log(lambda));
    if (d < bestd) {
      bestd = d;
      best = i;
    }
  }
  return static_cast<std::uint8_t>(best);
}

}  // namespace mofc
