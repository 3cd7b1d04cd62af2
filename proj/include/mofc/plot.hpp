// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mofc/png_io.hpp"

namespace mofc {

// Minimal static line plot (axes, grid, polylines with markers) for the
// rd-curve command. Numeric annotation lives in the CSV next to it.
class LinePlot {
 public:
  LinePlot(int width = 640, int height = 480) : w_(width), h_(height) {
    img_.width = w_;
    img_.height = h_;
    img_.bit_depth = 8;
    img_.rgb.assign(static_cast<std::size_t>(w_) * h_ * 3, 255);
  }

  void add_series(std::vector<std::pair<double, double>> pts, std::uint16_t r, std::uint16_t g,
                  std::uint16_t b) {
    series_.push_back({std::move(pts), {r, g, b}});
  }

  void save(const std::string& path) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_)
      for (auto [x, y] : s.pts) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    if (series_.empty() || xmax <= xmin) {
      xmin = 0;
      xmax = 1;
    }
    if (ymax <= ymin) {
      ymin = 0;
      ymax = 1;
    }
    double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;
    const int ml = 48, mr = 16, mt = 16, mb = 36;  // margins
    auto px = [&](double x) {
      return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (w_ - ml - mr));
    };
    auto py = [&](double y) {
      return h_ - mb - static_cast<int>((y - ymin) / (ymax - ymin) * (h_ - mt - mb));
    };
    // grid
    for (int i = 0; i <= 10; ++i) {
      int gx = ml + i * (w_ - ml - mr) / 10;
      int gy = mt + i * (h_ - mt - mb) / 10;
      for (int y = mt; y <= h_ - mb; ++y) set(gx, y, 225, 225, 225);
      for (int x = ml; x <= w_ - mr; ++x) set(x, gy, 225, 225, 225);
    }
    // axes
    for (int y = mt; y <= h_ - mb; ++y) set(ml, y, 20, 20, 20);
    for (int x = ml; x <= w_ - mr; ++x) set(x, h_ - mb, 20, 20, 20);
    for (const auto& s : series_) {
      for (std::size_t i = 1; i < s.pts.size(); ++i)
        line(px(s.pts[i - 1].first), py(s.pts[i - 1].second), px(s.pts[i].first),
             py(s.pts[i].second), s.rgb[0], s.rgb[1], s.rgb[2]);
      for (auto [x, y] : s.pts)
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) set(px(x) + dx, py(y) + dy, s.rgb[0], s.rgb[1], s.rgb[2]);
    }
    png_write(path, img_);
  }

 private:
  void set(int x, int y, std::uint16_t r, std::uint16_t g, std::uint16_t b) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
    img_.rgb[i] = r;
    img_.rgb[i + 1] = g;
    img_.rgb[i + 2] = b;
  }
  void line(int x0, int y0, int x1, int y1, std::uint16_t r, std::uint16_t g, std::uint16_t b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1, err = dx + dy;
    for (;;) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  struct Series {
    std::vector<std::pair<double, double>> pts;
    std::array<std::uint16_t, 3> rgb;
  };
  int w_, h_;
  PngImage img_;
  std::vector<Series> series_;
};

}  // namespace mofc
