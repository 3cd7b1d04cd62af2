// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "mofc/dataset.hpp"
#include "mofc/flow_io.hpp"
#include "mofc/frame.hpp"

using namespace mofc;
using mofc::test::TempDir;

#include "png_vector.inc"

TEST_CASE("png io round trips") {
  TempDir td("png");
  SUBCASE("8-bit") {
    PngImage img;
    img.width = 13;
    img.height = 9;
    img.bit_depth = 8;
    img.rgb.resize(13 * 9 * 3);
    Rng rng(41);
    for (auto& v : img.rgb) v = static_cast<std::uint16_t>(rng.below(256));
    png_write(td.str("a.png"), img);
    PngImage back = png_read(td.str("a.png"));
    CHECK(back.width == 13);
    CHECK(back.height == 9);
    CHECK(back.bit_depth == 8);
    CHECK(back.rgb == img.rgb);
  }
  SUBCASE("16-bit") {
    PngImage img;
    img.width = 7;
    img.height = 5;
    img.bit_depth = 16;
    img.rgb.resize(7 * 5 * 3);
    Rng rng(42);
    for (auto& v : img.rgb) v = static_cast<std::uint16_t>(rng.below(65536));
    png_write(td.str("b.png"), img);
    PngImage back = png_read(td.str("b.png"));
    CHECK(back.bit_depth == 16);
    CHECK(back.rgb == img.rgb);
  }
  SUBCASE("reference png with dynamic huffman and all five filters") {
    std::ofstream f(td.str("ref.png"), std::ios::binary);
    f.write(reinterpret_cast<const char*>(kRefPng), sizeof(kRefPng));
    f.close();
    PngImage img = png_read(td.str("ref.png"));
    REQUIRE(img.width == 23);
    REQUIRE(img.height == 17);
    for (int y = 0; y < 17; ++y)
      for (int x = 0; x < 23; ++x) {
        std::size_t i = (static_cast<std::size_t>(y) * 23 + x) * 3;
        CHECK(img.rgb[i] == (x * 7 + y * 13) % 256);
        CHECK(img.rgb[i + 1] == (x * x + 3 * y) % 256);
        CHECK(img.rgb[i + 2] == ((255 - x * 5 + y * y) % 256 + 256) % 256);
      }
  }
  SUBCASE("missing file raises io_error") {
    CHECK_THROWS_AS(png_read(td.str("missing.png")), io_error);
  }
  SUBCASE("garbage raises format_error") {
    std::ofstream f(td.str("junk.png"), std::ios::binary);
    f << "definitely not a png";
    f.close();
    CHECK_THROWS_AS(png_read(td.str("junk.png")), format_error);
  }
}

TEST_CASE("load_frame scaling") {
  TempDir td("frames");
  PngImage img;
  img.width = 4;
  img.height = 3;
  img.bit_depth = 8;
  img.rgb.assign(4 * 3 * 3, 0);

  SUBCASE("all black maps to zeros") {
    png_write(td.str("black.png"), img);
    auto f = load_frame<double>(td.str("black.png"));
    CHECK(f.colorspace == Colorspace::RGB);
    for (auto v : f.data.data) CHECK(v == 0.0);
  }
  SUBCASE("all white maps to ones") {
    for (auto& v : img.rgb) v = 255;
    png_write(td.str("white.png"), img);
    auto f = load_frame<double>(td.str("white.png"));
    for (auto v : f.data.data) CHECK(v == 1.0);
  }
  SUBCASE("mid-gray 128 maps to 128/255") {
    for (auto& v : img.rgb) v = 128;
    png_write(td.str("gray.png"), img);
    auto f = load_frame<double>(td.str("gray.png"));
    for (auto v : f.data.data) CHECK(v == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
  }
  SUBCASE("save/load round trip is exact at 8 bits") {
    Rng rng(43);
    Tensor<double> t(shape3(3, 6, 5));
    for (auto& v : t.data) v = rng.below(256) / 255.0;
    FrameT<double> fr(t, Colorspace::RGB);
    save_frame(td.str("rt.png"), fr);
    auto back = load_frame<double>(td.str("rt.png"));
    for (std::size_t i = 0; i < t.size(); ++i)
      CHECK(back.data[i] == doctest::Approx(t[i]).epsilon(1e-12));
  }
}

TEST_CASE("color conversion") {
  SUBCASE("white and black anchors") {
    Tensor<double> t(shape3(3, 1, 2));
    // pixel 0 white, pixel 1 black
    t.at3(0, 0, 0) = 1;
    t.at3(1, 0, 0) = 1;
    t.at3(2, 0, 0) = 1;
    auto y = rgb_to_ycbcr(FrameT<double>(t, Colorspace::RGB));
    CHECK(y.data.at3(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.data.at3(1, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.data.at3(2, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.data.at3(0, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y.data.at3(1, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.data.at3(2, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("round trip within 1e-6") {
    Rng rng(44);
    Tensor<double> t(shape3(3, 16, 16));
    for (auto& v : t.data) v = rng.uniform();
    FrameT<double> f(t, Colorspace::RGB);
    auto back = ycbcr_to_rgb(rgb_to_ycbcr(f));
    double worst = 0;
    for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - t[i]));
    CHECK(worst <= 1e-6);
  }
  SUBCASE("wrong colorspace raises contract_error") {
    Tensor<double> t(shape3(3, 2, 2), 0.5);
    CHECK_THROWS_AS(rgb_to_ycbcr(FrameT<double>(t, Colorspace::YCbCr)), contract_error);
    CHECK_THROWS_AS(ycbcr_to_rgb(FrameT<double>(t, Colorspace::RGB)), contract_error);
  }
}

TEST_CASE("flow io and visualization") {
  TempDir td("flow");
  SUBCASE("dump round trip") {
    Rng rng(45);
    Tensor<float> flow(shape3(2, 6, 9));
    for (auto& v : flow.data) v = static_cast<float>(rng.uniform(-12, 12));
    save_flow(td.str("f.bin"), flow);
    auto back = load_flow<float>(td.str("f.bin"));
    CHECK(back.dims == flow.dims);
    for (std::size_t i = 0; i < flow.size(); ++i) CHECK(back[i] == flow[i]);
  }
  SUBCASE("zero flow renders uniform white") {
    Tensor<double> flow(shape3(2, 4, 4), 0.0);
    auto img = flow_to_color(flow);
    for (auto v : img.data.data) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("constant flow renders a single saturated hue") {
    Tensor<double> flow(shape3(2, 5, 5));
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        flow.at3(0, y, x) = 2.0;
        flow.at3(1, y, x) = -1.0;
      }
    auto img = flow_to_color(flow);
    for (int c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 25; ++p)
        CHECK(img.data[static_cast<std::size_t>(c) * 25 + p] ==
              doctest::Approx(img.data[static_cast<std::size_t>(c) * 25]));
    // max displacement = full saturation: some channel far from 1
    double minc = 1.0;
    for (auto v : img.data.data) minc = std::min(minc, v);
    CHECK(minc == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("crop sampling") {
  Rng content(46);
  Tensor<float> a(shape3(3, 40, 50)), b(shape3(3, 40, 50));
  for (auto& v : a.data) v = static_cast<float>(content.uniform());
  for (auto& v : b.data) v = static_cast<float>(content.uniform());
  FramePairT<float> pair{FrameT<float>(a, Colorspace::YCbCr), FrameT<float>(b, Colorspace::YCbCr)};

  SUBCASE("identity when size equals dims") {
    Tensor<float> sq(shape3(3, 32, 32), 0.25f);
    FramePairT<float> p2{FrameT<float>(sq, Colorspace::YCbCr), FrameT<float>(sq, Colorspace::YCbCr)};
    Rng rng(1);
    auto c = sample_crop_pair(p2, 32, rng);
    for (std::size_t i = 0; i < sq.size(); ++i) CHECK(c.reference.data[i] == sq[i]);
  }
  SUBCASE("same seed, same offsets; shared between ref and cur") {
    Rng r1(7), r2(7);
    auto c1 = sample_crop_pair(pair, 16, r1);
    auto c2 = sample_crop_pair(pair, 16, r2);
    CHECK(c1.reference.data.data == c2.reference.data.data);
    CHECK(c1.current.data.data == c2.current.data.data);
    // shared offset: find the crop in the source and check the counterpart
    bool found = false;
    for (int y0 = 0; y0 <= 24 && !found; ++y0)
      for (int x0 = 0; x0 <= 34 && !found; ++x0) {
        if (c1.reference.data.at3(0, 0, 0) == a.at3(0, y0, x0) &&
            c1.reference.data.at3(0, 5, 7) == a.at3(0, y0 + 5, x0 + 7)) {
          found = true;
          CHECK(c1.current.data.at3(1, 3, 2) == b.at3(1, y0 + 3, x0 + 2));
        }
      }
    CHECK(found);
  }
  SUBCASE("oversized crop raises dimension_error") {
    Rng rng(8);
    CHECK_THROWS_AS(sample_crop_pair(pair, 48, rng), dimension_error);
  }
}

TEST_CASE("synthetic translation dataset") {
  SyntheticTranslationDataset<float> ds(8, 64, 2.5, 123);
  CHECK(ds.size() == 8);
  SUBCASE("deterministic regeneration") {
    auto p1 = ds.get(3);
    auto p2 = ds.get(3);
    CHECK(p1.reference.data.data == p2.reference.data.data);
    CHECK(p1.current.data.data == p2.current.data.data);
  }
  SUBCASE("current approximates reference warped by the true translation") {
    SyntheticTranslationDataset<float> clean(4, 64, 2.5, 77, /*with_innovation=*/false);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      auto pair = clean.get(i);
      float tx, ty;
      REQUIRE(clean.true_translation(i, tx, ty));
      CHECK(std::abs(tx) <= 2.5f);
      CHECK(std::abs(ty) <= 2.5f);
      Tensor<float> flow(shape3(2, 64, 64));
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          flow.at3(0, y, x) = tx;
          flow.at3(1, y, x) = ty;
        }
      auto warped = bilinear_warp_eval(pair.reference.data, flow);
      // interior pixels match almost exactly (borders read the wider canvas)
      double worst = 0;
      for (int c = 0; c < 3; ++c)
        for (int y = 4; y < 60; ++y)
          for (int x = 4; x < 60; ++x)
            worst = std::max(worst, std::abs(static_cast<double>(warped.at3(c, y, x)) -
                                             pair.current.data.at3(c, y, x)));
      CHECK(worst < 1e-5);
    }
  }
  SUBCASE("directory round trip via manifest") {
    TempDir td("synth");
    SyntheticTranslationDataset<float> small(3, 32, 2.0, 9);
    write_dataset_directory(small, td.str("data"));
    Manifest m = Manifest::load(td.str("data/manifest.json"));
    CHECK(m.sequences.size() == 3);
    DirectoryDataset<float> dir(td.str("data"), m);
    CHECK(dir.size() == 3);
    auto pair = dir.get(1);
    auto orig = small.get(1);
    CHECK(pair.reference.colorspace == Colorspace::YCbCr);
    // 8-bit quantization plus colorspace round trip: close, not exact
    double worst = 0;
    for (std::size_t i = 0; i < pair.reference.data.size(); ++i)
      worst = std::max(worst,
                       std::abs(static_cast<double>(pair.reference.data[i]) - orig.reference.data[i]));
    CHECK(worst < 0.02);
  }
}
