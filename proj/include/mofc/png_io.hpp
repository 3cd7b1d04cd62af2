// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Minimal self-contained PNG codec.
//
// Reader: non-interlaced 8- or 16-bit truecolor (RGB) images, all five scanline
// filters, stored/fixed/dynamic deflate blocks. Anything else (palette, alpha,
// grayscale, Adam7) is rejected with format_error; the pipeline is strictly
// 3-channel.
// Writer: filter-None scanlines in stored deflate blocks. Lossless is the only
// requirement for dataset and diagnostic dumps; compression is not.

struct PngImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;                // 8 or 16
  std::vector<std::uint16_t> rgb;   // row-major, 3 values per pixel
};

namespace pngdetail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

inline std::uint32_t adler32(const std::uint8_t* data, std::size_t n) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

// ----------------------------- inflate -------------------------------------

class BitReader {
 public:
  BitReader(const std::uint8_t* d, std::size_t n) : d_(d), n_(n) {}
  int bit() {
    if (cnt_ == 0) {
      if (pos_ >= n_) throw format_error("png: deflate stream exhausted");
      buf_ = d_[pos_++];
      cnt_ = 8;
    }
    int b = buf_ & 1;
    buf_ >>= 1;
    --cnt_;
    return b;
  }
  std::uint32_t bits(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(bit()) << i;
    return v;
  }
  void align_byte() { cnt_ = 0; }
  std::uint8_t byte() {
    if (pos_ >= n_) throw format_error("png: deflate stream exhausted");
    return d_[pos_++];
  }

 private:
  const std::uint8_t* d_;
  std::size_t n_;
  std::size_t pos_ = 0;
  std::uint8_t buf_ = 0;
  int cnt_ = 0;
};

struct Huffman {
  std::array<int, 16> count{};  // codes per bit length
  std::vector<int> symbol;      // symbols ordered by (length, symbol)

  static Huffman from_lengths(const std::vector<int>& lengths) {
    Huffman h;
    h.symbol.resize(lengths.size());
    for (int l : lengths)
      if (l) ++h.count[static_cast<std::size_t>(l)];
    std::array<int, 16> offs{};
    int sum = 0;
    for (int l = 1; l < 16; ++l) {
      offs[static_cast<std::size_t>(l)] = sum;
      sum += h.count[static_cast<std::size_t>(l)];
    }
    for (std::size_t s = 0; s < lengths.size(); ++s)
      if (lengths[s]) h.symbol[static_cast<std::size_t>(offs[static_cast<std::size_t>(lengths[s])]++)] = static_cast<int>(s);
    return h;
  }
};

inline int decode_symbol(BitReader& br, const Huffman& h) {
  int code = 0, first = 0, index = 0;
  for (int len = 1; len < 16; ++len) {
    code |= br.bit();
    int cnt = h.count[static_cast<std::size_t>(len)];
    if (code - first < cnt) return h.symbol[static_cast<std::size_t>(index + (code - first))];
    index += cnt;
    first = (first + cnt) << 1;
    code <<= 1;
  }
  throw format_error("png: invalid huffman code");
}

inline std::vector<std::uint8_t> inflate(const std::uint8_t* data, std::size_t n,
                                         std::size_t expected_hint = 0) {
  if (n < 2) throw format_error("png: zlib stream too short");
  if ((data[0] & 0x0F) != 8 || ((data[0] << 8 | data[1]) % 31) != 0)
    throw format_error("png: bad zlib header");
  if (data[1] & 0x20) throw format_error("png: preset dictionary unsupported");
  BitReader br(data + 2, n - 2);
  std::vector<std::uint8_t> out;
  if (expected_hint) out.reserve(expected_hint);

  static const int len_base[] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                                 31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
  static const int len_extra[] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                  2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
  static const int dist_base[] = {1,    2,    3,    4,    5,    7,     9,     13,   17,   25,
                                  33,   49,   65,   97,   129,  193,   257,   385,  513,  769,
                                  1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
  static const int dist_extra[] = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4,  4,  5,  5,  6,
                                   6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

  bool final_block = false;
  while (!final_block) {
    final_block = br.bit() != 0;
    int type = static_cast<int>(br.bits(2));
    if (type == 0) {
      br.align_byte();
      std::uint32_t len = br.byte();
      len |= static_cast<std::uint32_t>(br.byte()) << 8;
      std::uint32_t nlen = br.byte();
      nlen |= static_cast<std::uint32_t>(br.byte()) << 8;
      if ((len ^ 0xFFFFu) != nlen) throw format_error("png: stored block length mismatch");
      for (std::uint32_t i = 0; i < len; ++i) out.push_back(br.byte());
      continue;
    }
    Huffman litlen, dist;
    if (type == 1) {
      std::vector<int> ll(288);
      for (int i = 0; i < 144; ++i) ll[static_cast<std::size_t>(i)] = 8;
      for (int i = 144; i < 256; ++i) ll[static_cast<std::size_t>(i)] = 9;
      for (int i = 256; i < 280; ++i) ll[static_cast<std::size_t>(i)] = 7;
      for (int i = 280; i < 288; ++i) ll[static_cast<std::size_t>(i)] = 8;
      litlen = Huffman::from_lengths(ll);
      dist = Huffman::from_lengths(std::vector<int>(30, 5));
    } else if (type == 2) {
      int hlit = static_cast<int>(br.bits(5)) + 257;
      int hdist = static_cast<int>(br.bits(5)) + 1;
      int hclen = static_cast<int>(br.bits(4)) + 4;
      static const int order[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};
      std::vector<int> cl(19, 0);
      for (int i = 0; i < hclen; ++i) cl[static_cast<std::size_t>(order[i])] = static_cast<int>(br.bits(3));
      Huffman clh = Huffman::from_lengths(cl);
      std::vector<int> lens;
      lens.reserve(static_cast<std::size_t>(hlit + hdist));
      while (static_cast<int>(lens.size()) < hlit + hdist) {
        int sym = decode_symbol(br, clh);
        if (sym < 16) {
          lens.push_back(sym);
        } else if (sym == 16) {
          if (lens.empty()) throw format_error("png: repeat with no previous length");
          int rep = 3 + static_cast<int>(br.bits(2));
          for (int i = 0; i < rep; ++i) lens.push_back(lens.back());
        } else if (sym == 17) {
          int rep = 3 + static_cast<int>(br.bits(3));
          lens.insert(lens.end(), static_cast<std::size_t>(rep), 0);
        } else {
          int rep = 11 + static_cast<int>(br.bits(7));
          lens.insert(lens.end(), static_cast<std::size_t>(rep), 0);
        }
      }
      if (static_cast<int>(lens.size()) != hlit + hdist)
        throw format_error("png: code length overflow");
      litlen = Huffman::from_lengths(std::vector<int>(lens.begin(), lens.begin() + hlit));
      dist = Huffman::from_lengths(std::vector<int>(lens.begin() + hlit, lens.end()));
    } else {
      throw format_error("png: invalid deflate block type");
    }
    for (;;) {
      int sym = decode_symbol(br, litlen);
      if (sym < 256) {
        out.push_back(static_cast<std::uint8_t>(sym));
      } else if (sym == 256) {
        break;
      } else {
        sym -= 257;
        if (sym >= 29) throw format_error("png: invalid length symbol");
        int length = len_base[sym] + static_cast<int>(br.bits(len_extra[sym]));
        int dsym = decode_symbol(br, dist);
        if (dsym >= 30) throw format_error("png: invalid distance symbol");
        std::size_t distance =
            static_cast<std::size_t>(dist_base[dsym]) + br.bits(dist_extra[dsym]);
        if (distance > out.size()) throw format_error("png: distance past window start");
        std::size_t from = out.size() - distance;
        for (int i = 0; i < length; ++i) out.push_back(out[from + static_cast<std::size_t>(i)]);
      }
    }
  }
  return out;
}

// zlib stream with stored blocks
inline std::vector<std::uint8_t> deflate_stored(const std::uint8_t* data, std::size_t n) {
  std::vector<std::uint8_t> out;
  out.reserve(n + n / 65535 * 5 + 16);
  out.push_back(0x78);
  out.push_back(0x01);
  std::size_t pos = 0;
  do {
    std::size_t chunk = std::min<std::size_t>(65535, n - pos);
    bool last = pos + chunk == n;
    out.push_back(last ? 1 : 0);
    out.push_back(static_cast<std::uint8_t>(chunk & 0xFF));
    out.push_back(static_cast<std::uint8_t>(chunk >> 8));
    out.push_back(static_cast<std::uint8_t>(~chunk & 0xFF));
    out.push_back(static_cast<std::uint8_t>((~chunk >> 8) & 0xFF));
    out.insert(out.end(), data + pos, data + pos + chunk);
    pos += chunk;
  } while (pos < n);
  std::uint32_t ad = adler32(data, n);
  out.push_back(static_cast<std::uint8_t>(ad >> 24));
  out.push_back(static_cast<std::uint8_t>(ad >> 16));
  out.push_back(static_cast<std::uint8_t>(ad >> 8));
  out.push_back(static_cast<std::uint8_t>(ad));
  return out;
}

inline void put_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[5],
                         const std::vector<std::uint8_t>& body) {
  put_u32be(out, static_cast<std::uint32_t>(body.size()));
  std::size_t crc_start = out.size();
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(type[i]));
  out.insert(out.end(), body.begin(), body.end());
  put_u32be(out, crc32(out.data() + crc_start, out.size() - crc_start));
}

}  // namespace pngdetail

inline void png_write(const std::string& path, const PngImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw format_error("png_write: bit depth must be 8 or 16");
  if (img.width < 1 || img.height < 1 ||
      img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw dimension_error("png_write: buffer does not match dimensions");
  int bytes_per_sample = img.bit_depth / 8;
  std::size_t stride = static_cast<std::size_t>(img.width) * 3 * bytes_per_sample;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter None
    const std::uint16_t* row = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    for (int i = 0; i < img.width * 3; ++i) {
      if (bytes_per_sample == 2) {
        raw.push_back(static_cast<std::uint8_t>(row[i] >> 8));
        raw.push_back(static_cast<std::uint8_t>(row[i] & 0xFF));
      } else {
        raw.push_back(static_cast<std::uint8_t>(row[i] & 0xFF));
      }
    }
  }
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<std::uint8_t> ihdr;
  pngdetail::put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
  pngdetail::put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(static_cast<std::uint8_t>(img.bit_depth));
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace
  pngdetail::append_chunk(out, "IHDR", ihdr);
  pngdetail::append_chunk(out, "IDAT", pngdetail::deflate_stored(raw.data(), raw.size()));
  pngdetail::append_chunk(out, "IEND", {});
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("short write: " + path);
}

inline PngImage png_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    throw format_error("not a png file: " + path);

  PngImage img;
  int color_type = -1;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool seen_iend = false;
  while (pos + 8 <= buf.size() && !seen_iend) {
    std::uint32_t len = pngdetail::get_u32be(buf.data() + pos);
    if (pos + 12 + len > buf.size()) throw format_error("png: truncated chunk");
    std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
    const std::uint8_t* body = buf.data() + pos + 8;
    if (type == "IHDR") {
      if (len != 13) throw format_error("png: bad IHDR");
      img.width = static_cast<int>(pngdetail::get_u32be(body));
      img.height = static_cast<int>(pngdetail::get_u32be(body + 4));
      img.bit_depth = body[8];
      color_type = body[9];
      if (body[12] != 0) throw format_error("png: interlaced images unsupported");
      if (img.bit_depth != 8 && img.bit_depth != 16)
        throw format_error("png: only 8- and 16-bit depths supported");
      if (color_type != 2) throw format_error("png: 3-channel truecolor required");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), body, body + len);
    } else if (type == "IEND") {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (img.width < 1 || img.height < 1) throw format_error("png: missing IHDR");
  if (idat.empty()) throw format_error("png: no image data");

  int bps = img.bit_depth / 8;
  int pixel_bytes = 3 * bps;
  std::size_t stride = static_cast<std::size_t>(img.width) * pixel_bytes;
  std::size_t expected = (stride + 1) * static_cast<std::size_t>(img.height);
  std::vector<std::uint8_t> raw = pngdetail::inflate(idat.data(), idat.size(), expected);
  if (raw.size() != expected) throw format_error("png: decompressed size mismatch");

  // reverse scanline filters in place
  auto paeth = [](int a, int b, int c) {
    int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
  };
  std::vector<std::uint8_t> prev(stride, 0);
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t filter = raw[(stride + 1) * static_cast<std::size_t>(y)];
    std::uint8_t* row = raw.data() + (stride + 1) * static_cast<std::size_t>(y) + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= static_cast<std::size_t>(pixel_bytes) ? row[i - pixel_bytes] : 0;
      int b = prev[i];
      int c = i >= static_cast<std::size_t>(pixel_bytes) ? prev[i - pixel_bytes] : 0;
      int x = row[i];
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += paeth(a, b, c); break;
        default: throw format_error("png: unknown scanline filter");
      }
      row[i] = static_cast<std::uint8_t>(x & 0xFF);
    }
    std::copy(row, row + stride, prev.begin());
    std::uint16_t* dst = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    for (int i = 0; i < img.width * 3; ++i)
      dst[i] = bps == 2 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                        : row[i];
  }
  return img;
}

}  // namespace mofc
