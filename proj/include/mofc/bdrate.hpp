// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mofc/common.hpp"

namespace mofc {

// Rate-distortion curve: (bpp, MS-SSIM_dB) operating points, kept sorted by
// rate. Quality regressions along the curve are reported, not rejected.
struct RDCurve {
  struct Point {
    double bpp = 0;
    double quality_db = 0;
  };
  std::vector<Point> points;

  static RDCurve from_points(std::vector<Point> pts, std::ostream* warn = nullptr) {
    if (pts.size() < 2) throw contract_error("rd curve: at least two points required");
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.bpp < b.bpp; });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].bpp <= pts[i - 1].bpp)
        throw contract_error("rd curve: bpp values must be strictly increasing");
      if (pts[i].quality_db < pts[i - 1].quality_db && warn)
        *warn << "warning: rd curve quality decreases between " << pts[i - 1].bpp << " and "
              << pts[i].bpp << " bpp\n";
    }
    RDCurve c;
    c.points = std::move(pts);
    return c;
  }

  double min_quality() const { return std::min(points.front().quality_db, points.back().quality_db); }
  double max_quality() const { return std::max(points.front().quality_db, points.back().quality_db); }

  // CSV with header `bpp,ms_ssim_db`
  void save_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw io_error("cannot write rd curve: " + path);
    f << "bpp,ms_ssim_db\n";
    for (const auto& p : points) f << p.bpp << ',' << p.quality_db << '\n';
  }

  static RDCurve load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open rd curve: " + path);
    std::string line;
    if (!std::getline(f, line)) throw format_error("rd curve csv: empty file");
    std::vector<Point> pts;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      Point p;
      char comma;
      if (!(ss >> p.bpp >> comma >> p.quality_db)) throw format_error("rd curve csv: bad row");
      pts.push_back(p);
    }
    return from_points(std::move(pts));
  }
};

namespace detail {

// least-squares cubic fit y(x); exact interpolation with four points
inline std::array<double, 4> cubic_fit(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  std::array<std::array<double, 4>, 4> ata{};
  std::array<double, 4> aty{};
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::array<double, 4> phi = {1.0, x[k], x[k] * x[k], x[k] * x[k] * x[k]};
    for (int i = 0; i < 4; ++i) {
      aty[static_cast<std::size_t>(i)] += phi[static_cast<std::size_t>(i)] * y[k];
      for (int j = 0; j < 4; ++j)
        ata[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            phi[static_cast<std::size_t>(i)] * phi[static_cast<std::size_t>(j)];
    }
  }
  // gaussian elimination with partial pivoting
  std::array<std::array<double, 5>, 4> m{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = ata[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    m[static_cast<std::size_t>(i)][4] = aty[static_cast<std::size_t>(i)];
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
          std::abs(m[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
        piv = r;
    std::swap(m[static_cast<std::size_t>(col)], m[static_cast<std::size_t>(piv)]);
    double d = m[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    if (std::abs(d) < 1e-14) throw contract_error("bd-rate: singular cubic fit");
    for (int j = col; j < 5; ++j) m[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)] /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
      for (int j = col; j < 5; ++j)
        m[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] -=
            f * m[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
    }
  }
  return {m[0][4], m[1][4], m[2][4], m[3][4]};
}

inline double cubic_integral(const std::array<double, 4>& c, double lo, double hi) {
  auto prim = [&](double x) {
    return c[0] * x + c[1] * x * x / 2 + c[2] * x * x * x / 3 + c[3] * x * x * x * x / 4;
  };
  return prim(hi) - prim(lo);
}

}  // namespace detail

// Bjontegaard delta rate between two curves: cubic fit of log10(rate) against
// quality, both integrated over the shared quality interval; negative means
// the test curve spends less rate at equal quality.
inline double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  double lo = std::max(anchor.min_quality(), test.min_quality());
  double hi = std::min(anchor.max_quality(), test.max_quality());
  if (hi <= lo) throw contract_error("bd-rate: curves share no quality range");
  auto count_inside = [&](const RDCurve& c) {
    int n = 0;
    for (const auto& p : c.points)
      if (p.quality_db >= lo - 1e-9 && p.quality_db <= hi + 1e-9) ++n;
    return n;
  };
  if (count_inside(anchor) < 2 || count_inside(test) < 2)
    throw contract_error("bd-rate: fewer than two points inside the shared quality range");
  auto fit = [](const RDCurve& c) {
    std::vector<double> q, lr;
    for (const auto& p : c.points) {
      if (p.bpp <= 0) throw contract_error("bd-rate: non-positive rate");
      q.push_back(p.quality_db);
      lr.push_back(std::log10(p.bpp));
    }
    return detail::cubic_fit(q, lr);
  };
  auto ca = fit(anchor);
  auto ct = fit(test);
  double avg_diff =
      (detail::cubic_integral(ct, lo, hi) - detail::cubic_integral(ca, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

}  // namespace mofc
