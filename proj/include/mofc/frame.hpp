// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mofc/png_io.hpp"
#include "mofc/tensor.hpp"

namespace mofc {

enum class Colorspace { RGB, YCbCr };

// A 3xHxW image in [0,1]; the unit of coding.
template <typename T>
struct FrameT {
  Tensor<T> data;  // (3, H, W)
  Colorspace colorspace = Colorspace::RGB;

  FrameT() = default;
  FrameT(Tensor<T> d, Colorspace cs) : data(std::move(d)), colorspace(cs) {
    if (data.rank() != 3 || data.dim(0) != 3) throw dimension_error("frame: 3xHxW required");
  }

  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
};

template <typename T>
struct FramePairT {
  FrameT<T> reference;  // x_{t-1}
  FrameT<T> current;    // x_t

  void validate() const {
    if (!reference.data.same_shape(current.data))
      throw dimension_error("frame pair: reference and current dimensions differ");
    if (reference.colorspace != current.colorspace)
      throw contract_error("frame pair: colorspace mismatch");
  }
};

using Frame = FrameT<float>;
using FramePair = FramePairT<float>;

template <typename T>
FrameT<T> load_frame(const std::string& path) {
  PngImage img = png_read(path);
  T scale = img.bit_depth == 16 ? T(1) / T(65535) : T(1) / T(255);
  Tensor<T> data(shape3(3, img.height, img.width));
  std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c)
      data[static_cast<std::size_t>(c) * plane + p] = img.rgb[p * 3 + static_cast<std::size_t>(c)] * scale;
  return FrameT<T>(std::move(data), Colorspace::RGB);
}

template <typename T>
void save_frame(const std::string& path, const FrameT<T>& f, int bit_depth = 8) {
  PngImage img;
  img.width = f.width();
  img.height = f.height();
  img.bit_depth = bit_depth;
  int maxv = bit_depth == 16 ? 65535 : 255;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      T v = clamp_val(f.data[static_cast<std::size_t>(c) * plane + p], T(0), T(1));
      img.rgb[p * 3 + static_cast<std::size_t>(c)] =
          static_cast<std::uint16_t>(round_half_away(v * static_cast<T>(maxv)));
    }
  png_write(path, img);
}

// BT.601 full-range conversion. Chosen (and pinned here) so golden vectors
// stay stable; white maps to (1, 0.5, 0.5) and black to (0, 0.5, 0.5).
template <typename T>
FrameT<T> rgb_to_ycbcr(const FrameT<T>& f) {
  if (f.colorspace != Colorspace::RGB) throw contract_error("rgb_to_ycbcr: input not RGB");
  std::size_t plane = static_cast<std::size_t>(f.height()) * f.width();
  Tensor<T> out(f.data.dims);
  const T* r = f.data.ptr();
  const T* g = r + plane;
  const T* b = g + plane;
  for (std::size_t p = 0; p < plane; ++p) {
    T y = T(0.299) * r[p] + T(0.587) * g[p] + T(0.114) * b[p];
    T cb = (b[p] - y) / T(1.772) + T(0.5);
    T cr = (r[p] - y) / T(1.402) + T(0.5);
    out[p] = clamp_val(y, T(0), T(1));
    out[plane + p] = clamp_val(cb, T(0), T(1));
    out[2 * plane + p] = clamp_val(cr, T(0), T(1));
  }
  return FrameT<T>(std::move(out), Colorspace::YCbCr);
}

template <typename T>
FrameT<T> ycbcr_to_rgb(const FrameT<T>& f) {
  if (f.colorspace != Colorspace::YCbCr) throw contract_error("ycbcr_to_rgb: input not YCbCr");
  std::size_t plane = static_cast<std::size_t>(f.height()) * f.width();
  Tensor<T> out(f.data.dims);
  const T* y = f.data.ptr();
  const T* cb = y + plane;
  const T* cr = cb + plane;
  for (std::size_t p = 0; p < plane; ++p) {
    T r = y[p] + T(1.402) * (cr[p] - T(0.5));
    T b = y[p] + T(1.772) * (cb[p] - T(0.5));
    T g = (y[p] - T(0.299) * r - T(0.114) * b) / T(0.587);
    out[p] = clamp_val(r, T(0), T(1));
    out[plane + p] = clamp_val(g, T(0), T(1));
    out[2 * plane + p] = clamp_val(b, T(0), T(1));
  }
  return FrameT<T>(std::move(out), Colorspace::RGB);
}

}  // namespace mofc
