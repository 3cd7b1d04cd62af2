// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "mofc/frame.hpp"
#include "mofc/tensor.hpp"

namespace mofc {

// Debug dump format: H then W as little-endian 32-bit signed integers,
// followed by row-major interleaved (u, v) displacements as little-endian
// 32-bit floats.

template <typename T>
void save_flow(const std::string& path, const Tensor<T>& flow) {
  if (flow.rank() != 3 || flow.dim(0) != 2) throw dimension_error("save_flow: 2xHxW required");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  std::int32_t h = flow.dim(1), w = flow.dim(2);
  auto put_i32 = [&](std::int32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_i32(h);
  put_i32(w);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p) {
    float uv[2] = {static_cast<float>(flow[p]), static_cast<float>(flow[plane + p])};
    f.write(reinterpret_cast<const char*>(uv), 8);
  }
  if (!f) throw io_error("short write: " + path);
}

template <typename T>
Tensor<T> load_flow(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  auto get_i32 = [&]() {
    std::uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::int32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                     (static_cast<std::uint32_t>(b[3]) << 24));
  };
  std::int32_t h = get_i32(), w = get_i32();
  if (!f || h < 1 || w < 1) throw format_error("flow dump: bad header");
  Tensor<T> flow(shape3(2, h, w));
  std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p) {
    float uv[2];
    f.read(reinterpret_cast<char*>(uv), 8);
    flow[p] = static_cast<T>(uv[0]);
    flow[plane + p] = static_cast<T>(uv[1]);
  }
  if (!f) throw format_error("flow dump: truncated data");
  return flow;
}

// HSV-wheel visualization: hue encodes direction, saturation encodes magnitude
// normalized by the field maximum, value is 1. Zero flow renders white.
template <typename T>
FrameT<T> flow_to_color(const Tensor<T>& flow) {
  if (flow.rank() != 3 || flow.dim(0) != 2)
    throw dimension_error("flow_to_color: 2xHxW required");
  int h = flow.dim(1), w = flow.dim(2);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  T maxmag = T(0);
  for (std::size_t p = 0; p < plane; ++p) {
    T m = std::sqrt(flow[p] * flow[p] + flow[plane + p] * flow[plane + p]);
    maxmag = std::max(maxmag, m);
  }
  Tensor<T> rgb(shape3(3, h, w));
  for (std::size_t p = 0; p < plane; ++p) {
    T u = flow[p], v = flow[plane + p];
    T mag = std::sqrt(u * u + v * v);
    T sat = maxmag > T(0) ? mag / maxmag : T(0);
    T hue = static_cast<T>((std::atan2(static_cast<double>(v), static_cast<double>(u)) /
                                (2.0 * 3.14159265358979323846) +
                            0.5) *
                           6.0);  // [0, 6)
    if (hue >= T(6)) hue -= T(6);
    int sector = static_cast<int>(hue);
    T frac = hue - static_cast<T>(sector);
    T val = T(1);
    T pq[3] = {val * (T(1) - sat), val * (T(1) - sat * frac), val * (T(1) - sat * (T(1) - frac))};
    T r, g, b;
    switch (sector) {
      case 0: r = val; g = pq[2]; b = pq[0]; break;
      case 1: r = pq[1]; g = val; b = pq[0]; break;
      case 2: r = pq[0]; g = val; b = pq[2]; break;
      case 3: r = pq[0]; g = pq[1]; b = val; break;
      case 4: r = pq[2]; g = pq[0]; b = val; break;
      default: r = val; g = pq[0]; b = pq[1]; break;
    }
    rgb[p] = r;
    rgb[plane + p] = g;
    rgb[2 * plane + p] = b;
  }
  return FrameT<T>(std::move(rgb), Colorspace::RGB);
}

}  // namespace mofc
