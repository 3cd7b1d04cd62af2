// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mofc/frame.hpp"
#include "mofc/ops_warp.hpp"
#include "mofc/random.hpp"

namespace mofc {

// Dataset layout: <root>/<sequence>/<index>.png, consecutive indices form
// pairs (stride 1). The manifest lists sequences and frame counts.
struct Manifest {
  struct Sequence {
    std::string name;
    int frames = 0;
  };
  std::vector<Sequence> sequences;

  static Manifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open manifest: " + path);
    nlohmann::json j;
    f >> j;
    Manifest m;
    for (const auto& s : j.at("sequences")) {
      Sequence seq;
      seq.name = s.at("name").get<std::string>();
      seq.frames = s.at("frames").get<int>();
      if (seq.frames < 2) throw contract_error("manifest: sequence with fewer than 2 frames");
      m.sequences.push_back(std::move(seq));
    }
    return m;
  }

  void save(const std::string& path) const {
    nlohmann::json j;
    j["sequences"] = nlohmann::json::array();
    for (const auto& s : sequences) j["sequences"].push_back({{"name", s.name}, {"frames", s.frames}});
    std::ofstream f(path);
    if (!f) throw io_error("cannot write manifest: " + path);
    f << j.dump(2) << '\n';
  }
};

// Both frames cropped at one shared offset; deterministic for a given rng
// state.
template <typename T>
FramePairT<T> sample_crop_pair(const FramePairT<T>& pair, int size, Rng& rng) {
  pair.validate();
  int h = pair.reference.height(), w = pair.reference.width();
  if (size > h || size > w) throw dimension_error("sample_crop_pair: crop exceeds frame");
  int y0 = h == size ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(h - size) + 1));
  int x0 = w == size ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(w - size) + 1));
  auto crop = [&](const FrameT<T>& f) {
    Tensor<T> out(shape3(3, size, size));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at3(c, y, x) = f.data.at3(c, y0 + y, x0 + x);
    return FrameT<T>(std::move(out), f.colorspace);
  };
  return {crop(pair.reference), crop(pair.current)};
}

// Interface over an indexed collection of frame pairs.
template <typename T>
class PairSource {
 public:
  virtual ~PairSource() = default;
  virtual std::size_t size() const = 0;
  virtual FramePairT<T> get(std::size_t index) const = 0;
  // ground-truth global translation when the source has one (synthetic data)
  virtual bool true_translation(std::size_t, T&, T&) const { return false; }
};

// Frames loaded from a manifest-described directory tree. Loaded frames are
// converted to YCbCr: the whole coding pipeline operates in that space.
template <typename T>
class DirectoryDataset : public PairSource<T> {
 public:
  DirectoryDataset(std::string root, const Manifest& manifest, bool to_ycbcr = true)
      : root_(std::move(root)), to_ycbcr_(to_ycbcr) {
    for (const auto& seq : manifest.sequences)
      for (int i = 0; i + 1 < seq.frames; ++i) pairs_.emplace_back(seq.name, i);
    if (pairs_.empty()) throw contract_error("dataset: no frame pairs");
  }

  std::size_t size() const override { return pairs_.size(); }

  FramePairT<T> get(std::size_t index) const override {
    const auto& [name, first] = pairs_.at(index);
    auto path = [&](int i) {
      return (std::filesystem::path(root_) / name / (std::to_string(i) + ".png")).string();
    };
    FramePairT<T> pair{load_frame<T>(path(first)), load_frame<T>(path(first + 1))};
    if (to_ycbcr_) {
      pair.reference = rgb_to_ycbcr(pair.reference);
      pair.current = rgb_to_ycbcr(pair.current);
    }
    pair.validate();
    return pair;
  }

 private:
  std::string root_;
  bool to_ycbcr_;
  std::vector<std::pair<std::string, int>> pairs_;
};

// ---------------------------------------------------------------------------
// Synthetic translation pairs: smooth procedural content moved by a known
// global displacement, plus a small "innovation" patch whose appearance
// changes between the frames (content motion compensation cannot explain, so
// the conditional path has real work to do). Pairs regenerate deterministically
// from (seed, index).
// ---------------------------------------------------------------------------

template <typename T>
class SyntheticTranslationDataset : public PairSource<T> {
 public:
  // levels > 0 snaps each translation axis to that many evenly spaced values
  // in [-max_disp, max_disp]; 0 leaves the distribution continuous.
  // scene_count > 0 draws the background content from that many shared scenes
  // (pair i uses scene i % scene_count); 0 gives every pair its own scene.
  SyntheticTranslationDataset(std::size_t count, int size, double max_disp, std::uint64_t seed,
                              bool with_innovation = true, int levels = 0, int scene_count = 0)
      : count_(count), size_(size), max_disp_(max_disp), seed_(seed),
        with_innovation_(with_innovation), levels_(levels), scene_count_(scene_count) {
    if (size_ < 16) throw contract_error("synthetic dataset: size too small");
  }

  std::size_t size() const override { return count_; }

  FramePairT<T> get(std::size_t index) const override {
    Rng rng(Rng::mix(seed_, index));
    // translation drawn first so true_translation() stays in lockstep
    double tx = draw_axis(rng);
    double ty = draw_axis(rng);
    const int margin = 8;
    const int cs = size_ + 2 * margin;
    Tensor<T> canvas = scene_count_ > 0 ? shared_scene(index, cs) : make_canvas(rng, cs);

    Tensor<T> ref(shape3(3, size_, size_));
    Tensor<T> cur(shape3(3, size_, size_));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < size_; ++y)
        for (int x = 0; x < size_; ++x) {
          ref.at3(c, y, x) = canvas.at3(c, y + margin, x + margin);
          cur.at3(c, y, x) = sample_bilinear(canvas, c, y + margin + ty, x + margin + tx);
        }

    if (with_innovation_) apply_innovation(rng, cur);
    return {FrameT<T>(std::move(ref), Colorspace::YCbCr),
            FrameT<T>(std::move(cur), Colorspace::YCbCr)};
  }

  bool true_translation(std::size_t index, T& tx, T& ty) const override {
    Rng rng(Rng::mix(seed_, index));
    tx = static_cast<T>(draw_axis(rng));
    ty = static_cast<T>(draw_axis(rng));
    return true;
  }

 private:
  // smooth base (bilinearly upsampled low-resolution noise), soft disks, and
  // fixed-frequency luminance gratings. The gratings carry the motion: a
  // global shift becomes a phase shift of known carriers, giving every sample
  // the same shift-revealing structure (the period stays above twice the
  // maximum displacement, so phases are unambiguous).
  static Tensor<T> make_canvas(Rng& rng, int cs) {
    Tensor<T> canvas(shape3(3, cs, cs));
    const int grid = 7;
    std::vector<double> coarse(3 * grid * grid);
    for (auto& v : coarse) v = rng.uniform(0.2, 0.8);
    for (int c = 0; c < 3; ++c) {
      double chroma_damp = c == 0 ? 1.0 : 0.35;  // milder chroma content
      for (int y = 0; y < cs; ++y)
        for (int x = 0; x < cs; ++x) {
          double gy = static_cast<double>(y) / (cs - 1) * (grid - 1);
          double gx = static_cast<double>(x) / (cs - 1) * (grid - 1);
          int y0 = std::min(static_cast<int>(gy), grid - 2);
          int x0 = std::min(static_cast<int>(gx), grid - 2);
          double fy = gy - y0, fx = gx - x0;
          auto at = [&](int yy, int xx) { return coarse[(static_cast<std::size_t>(c) * grid + yy) * grid + xx]; };
          double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                     fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
          canvas.at3(c, y, x) = static_cast<T>(0.5 + (v - 0.5) * chroma_damp);
        }
    }
    // carrier phases are fixed constants: the reference-frame carrier is the
    // same in every pair, so a displacement reads out as a phase shift of
    // known, shared patterns
    const double period = 9.0, amp = 0.20;
    const double ph1 = 0.7, ph2 = 2.1, ph3 = 4.4;
    for (int y = 0; y < cs; ++y)
      for (int x = 0; x < cs; ++x) {
        double g = amp * std::sin(2 * 3.14159265358979 * x / period + ph1) +
                   amp * std::sin(2 * 3.14159265358979 * y / period + ph2) +
                   0.6 * amp * std::sin(2 * 3.14159265358979 * (x + y) / (period * 1.4142) + ph3);
        canvas.at3(0, y, x) = static_cast<T>(clamp_val(canvas.at3(0, y, x) + static_cast<T>(g),
                                                       T(0.02), T(0.98)));
      }
    const int ndisks = 4;
    for (int d = 0; d < ndisks; ++d) {
      double cy = rng.uniform(0, cs - 1), cx = rng.uniform(0, cs - 1);
      double radius = rng.uniform(5.0, 14.0);
      double lum = rng.uniform(0.15, 0.85);
      double cb = rng.uniform(0.35, 0.65), cr = rng.uniform(0.35, 0.65);
      for (int y = 0; y < cs; ++y)
        for (int x = 0; x < cs; ++x) {
          double dist2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          double a = 0.7 * std::exp(-dist2 / (2.0 * radius * radius / 4.0));
          if (a < 1e-3) continue;
          canvas.at3(0, y, x) = static_cast<T>((1 - a) * canvas.at3(0, y, x) + a * lum);
          canvas.at3(1, y, x) = static_cast<T>((1 - a) * canvas.at3(1, y, x) + a * cb);
          canvas.at3(2, y, x) = static_cast<T>((1 - a) * canvas.at3(2, y, x) + a * cr);
        }
    }
    return canvas;
  }

  double draw_axis(Rng& rng) const {
    double u = rng.uniform(-max_disp_, max_disp_);
    if (levels_ <= 1) return u;
    double step = 2.0 * max_disp_ / (levels_ - 1);
    return -max_disp_ + step * std::floor((u + max_disp_) / step + 0.5);
  }

  Tensor<T> shared_scene(std::size_t index, int cs) const {
    Rng rng(Rng::mix(seed_ ^ 0x5CE9E000ULL, index % static_cast<std::size_t>(scene_count_)));
    return make_canvas(rng, cs);
  }

  static T sample_bilinear(const Tensor<T>& img, int c, double sy, double sx) {
    int h = img.dim(1), w = img.dim(2);
    double fy0 = std::floor(sy), fx0 = std::floor(sx);
    double fy = sy - fy0, fx = sx - fx0;
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    int y0 = cl(static_cast<int>(fy0), h - 1), y1 = cl(static_cast<int>(fy0) + 1, h - 1);
    int x0 = cl(static_cast<int>(fx0), w - 1), x1 = cl(static_cast<int>(fx0) + 1, w - 1);
    return static_cast<T>((1 - fy) * ((1 - fx) * img.at3(c, y0, x0) + fx * img.at3(c, y0, x1)) +
                          fy * ((1 - fx) * img.at3(c, y1, x0) + fx * img.at3(c, y1, x1)));
  }

  // overwrite a small soft-edged square in the current frame with fresh
  // texture; roughly 2-3% of the pixels
  void apply_innovation(Rng& rng, Tensor<T>& cur) const {
    int side = std::max(6, size_ / 6);
    int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size_ - side)));
    int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size_ - side)));
    double lum0 = rng.uniform(0.2, 0.8), lum1 = rng.uniform(0.2, 0.8);
    double cb = rng.uniform(0.35, 0.65), cr = rng.uniform(0.35, 0.65);
    double phase = rng.uniform(0, 6.28), freq = rng.uniform(0.5, 1.6);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        double ey = std::min({y + 1, side - y, 3}) / 3.0;  // feathered border
        double ex = std::min({x + 1, side - x, 3}) / 3.0;
        double a = ey * ex;
        double wave = 0.5 + 0.5 * std::sin(phase + freq * (x + 0.6 * y));
        double lum = lum0 + (lum1 - lum0) * wave;
        cur.at3(0, y0 + y, x0 + x) =
            static_cast<T>((1 - a) * cur.at3(0, y0 + y, x0 + x) + a * lum);
        cur.at3(1, y0 + y, x0 + x) =
            static_cast<T>((1 - a) * cur.at3(1, y0 + y, x0 + x) + a * cb);
        cur.at3(2, y0 + y, x0 + x) =
            static_cast<T>((1 - a) * cur.at3(2, y0 + y, x0 + x) + a * cr);
      }
  }

  std::size_t count_;
  int size_;
  double max_disp_;
  std::uint64_t seed_;
  bool with_innovation_;
  int levels_;
  int scene_count_;
};

// Materialize a source as a dataset directory (one two-frame sequence per
// pair) with a manifest and, when available, a ground-truth translation file.
template <typename T>
void write_dataset_directory(const PairSource<T>& src, const std::string& root,
                             int bit_depth = 8) {
  std::filesystem::create_directories(root);
  Manifest m;
  nlohmann::json truth = nlohmann::json::array();
  bool any_truth = false;
  for (std::size_t i = 0; i < src.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq%05zu", i);
    auto dir = std::filesystem::path(root) / name;
    std::filesystem::create_directories(dir);
    FramePairT<T> pair = src.get(i);
    // stored as RGB files; loaders convert back to YCbCr
    FrameT<T> r = pair.reference.colorspace == Colorspace::YCbCr ? ycbcr_to_rgb(pair.reference)
                                                                 : pair.reference;
    FrameT<T> c =
        pair.current.colorspace == Colorspace::YCbCr ? ycbcr_to_rgb(pair.current) : pair.current;
    save_frame((dir / "0.png").string(), r, bit_depth);
    save_frame((dir / "1.png").string(), c, bit_depth);
    m.sequences.push_back({name, 2});
    T tx, ty;
    if (src.true_translation(i, tx, ty)) {
      truth.push_back({{"sequence", name}, {"tx", static_cast<double>(tx)}, {"ty", static_cast<double>(ty)}});
      any_truth = true;
    }
  }
  m.save((std::filesystem::path(root) / "manifest.json").string());
  if (any_truth) {
    std::ofstream f((std::filesystem::path(root) / "truth.json").string());
    f << truth.dump(2) << '\n';
  }
}

}  // namespace mofc
