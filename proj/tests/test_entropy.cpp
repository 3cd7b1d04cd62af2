// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mofc/bitstream.hpp"
#include "mofc/laplace_table.hpp"
#include "mofc/ops_rate.hpp"

using namespace mofc;

namespace {

// draw an integer symbol from Laplace(mu, b) by inverse CDF
std::int32_t sample_laplace_symbol(Rng& rng, double mu, double b) {
  double u = rng.uniform() - 0.5;
  double x = mu - b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
  return round_half_away(x);
}

}  // namespace

TEST_CASE("cdf tables are normalized and cover the support") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    double mu = rng.uniform(-30, 30), b = rng.uniform(1e-7, 12.0);
    LaplaceCdf t = build_laplace_cdf(mu, b);
    CHECK(t.cum.front() == 0);
    CHECK(t.cum.back() == kRcProbTotal);
    for (std::size_t i = 1; i < t.cum.size(); ++i) CHECK(t.cum[i] > t.cum[i - 1]);
    CHECK(t.smin <= round_half_away(mu));
    CHECK(t.smax >= round_half_away(mu));
  }
}

TEST_CASE("range coder round trips") {
  SUBCASE("empty symbol list costs zero bytes") {
    std::vector<std::int32_t> sym;
    std::vector<double> mu, b;
    auto bytes = laplace_encode(sym, mu, b);
    CHECK(bytes.empty());
    auto back = laplace_decode(bytes.data(), bytes.size(), mu, b);
    CHECK(back.empty());
  }
  SUBCASE("single symbol") {
    std::vector<std::int32_t> sym = {0};
    std::vector<double> mu = {0.0}, b = {1.0};
    auto bytes = laplace_encode(sym, mu, b);
    auto back = laplace_decode(bytes.data(), bytes.size(), mu, b);
    CHECK(back == sym);
  }
  SUBCASE("10k symbols across 20 parameter settings, lossless and calibrated") {
    Rng rng(32);
    for (int setting = 0; setting < 20; ++setting) {
      double mu = rng.uniform(-20, 20);
      double b = rng.uniform(0.08, 6.0);
      const std::size_t n = 10000;
      std::vector<std::int32_t> sym(n);
      std::vector<double> vmu(n, mu), vb(n, b);
      double est_bits = 0;
      for (auto& s : sym) {
        s = sample_laplace_symbol(rng, mu, b);
        est_bits += laplace_bits_scalar(static_cast<double>(s), mu, b);
      }
      auto bytes = laplace_encode(sym, vmu, vb);
      auto back = laplace_decode(bytes.data(), bytes.size(), vmu, vb);
      REQUIRE(back == sym);
      double actual_bits = 8.0 * static_cast<double>(bytes.size());
      CHECK(actual_bits <= 1.01 * est_bits + 64.0);
    }
  }
  SUBCASE("mixed per-element parameters") {
    Rng rng(33);
    const std::size_t n = 4000;
    std::vector<std::int32_t> sym(n);
    std::vector<double> vmu(n), vb(n);
    for (std::size_t i = 0; i < n; ++i) {
      vmu[i] = rng.uniform(-9, 9);
      vb[i] = rng.uniform(0.03, 4.0);
      sym[i] = sample_laplace_symbol(rng, vmu[i], vb[i]);
    }
    auto bytes = laplace_encode(sym, vmu, vb);
    auto back = laplace_decode(bytes.data(), bytes.size(), vmu, vb);
    CHECK(back == sym);
  }
  SUBCASE("out-of-support symbols clamp rather than corrupt the stream") {
    std::vector<std::int32_t> sym = {5000, -5000, 0};
    std::vector<double> mu(3, 0.0), b(3, 1.0);  // support ~ [-64, 64]
    auto bytes = laplace_encode(sym, mu, b);
    auto back = laplace_decode(bytes.data(), bytes.size(), mu, b);
    CHECK(back[0] == 64);
    CHECK(back[1] == -64);
    CHECK(back[2] == 0);
  }
  SUBCASE("truncated stream raises decode_error") {
    Rng rng(34);
    const std::size_t n = 500;
    std::vector<std::int32_t> sym(n);
    std::vector<double> vmu(n, 0.0), vb(n, 2.0);
    for (auto& s : sym) s = sample_laplace_symbol(rng, 0.0, 2.0);
    auto bytes = laplace_encode(sym, vmu, vb);
    REQUIRE(bytes.size() > 8);
    CHECK_THROWS_AS(laplace_decode(bytes.data(), bytes.size() / 4, vmu, vb), decode_error);
  }
  SUBCASE("sequential decoder mirrors the batch decoder") {
    Rng rng(35);
    const std::size_t n = 300;
    std::vector<std::int32_t> sym(n);
    std::vector<double> vmu(n), vb(n);
    for (std::size_t i = 0; i < n; ++i) {
      vmu[i] = rng.uniform(-3, 3);
      vb[i] = rng.uniform(0.1, 2.0);
      sym[i] = sample_laplace_symbol(rng, vmu[i], vb[i]);
    }
    auto bytes = laplace_encode(sym, vmu, vb);
    LaplaceSeqDecoder seq(bytes.data(), bytes.size());
    for (std::size_t i = 0; i < n; ++i) CHECK(seq.decode_one(vmu[i], vb[i]) == sym[i]);
  }
}

TEST_CASE("bitstream container") {
  Bitstream bs;
  bs.lambda_index = 3;
  bs.height = 720;
  bs.width = 1280;
  bs.payloads[0] = {1, 2, 3};
  bs.payloads[1] = {9, 8, 7, 6};
  bs.payloads[2] = {};
  bs.payloads[3] = {42};

  SUBCASE("serialize/parse round trip") {
    auto buf = bs.serialize();
    auto back = Bitstream::parse(buf);
    CHECK(back.lambda_index == 3);
    CHECK(back.height == 720);
    CHECK(back.width == 1280);
    for (int i = 0; i < 4; ++i)
      CHECK(back.payloads[static_cast<std::size_t>(i)] == bs.payloads[static_cast<std::size_t>(i)]);
  }
  SUBCASE("layout is bit-exact") {
    auto buf = bs.serialize();
    CHECK(buf[0] == 'M');
    CHECK(buf[1] == 'O');
    CHECK(buf[2] == 'F');
    CHECK(buf[3] == 'C');
    CHECK(buf[4] == 1);    // version
    CHECK(buf[5] == 3);    // lambda index
    CHECK(buf[6] == 0x02); // 720 big-endian
    CHECK(buf[7] == 0xD0);
    CHECK(buf[8] == 0x05); // 1280 big-endian
    CHECK(buf[9] == 0x00);
    CHECK(buf[13] == 3);   // payload 0 length
    CHECK(buf[17] == 4);
    CHECK(buf[21] == 0);
    CHECK(buf[25] == 1);
    CHECK(buf.size() == 26 + 8u);
  }
  SUBCASE("corruption is rejected") {
    auto buf = bs.serialize();
    auto bad = buf;
    bad[0] = 'X';
    CHECK_THROWS_AS(Bitstream::parse(bad), decode_error);
    auto trunc = buf;
    trunc.resize(trunc.size() - 2);
    CHECK_THROWS_AS(Bitstream::parse(trunc), decode_error);
    auto extra = buf;
    extra.push_back(0);
    CHECK_THROWS_AS(Bitstream::parse(extra), decode_error);
  }
  SUBCASE("file round trip") {
    mofc::test::TempDir td("bitstream");
    bs.save(td.str("frame.mofc"));
    auto back = Bitstream::load(td.str("frame.mofc"));
    CHECK(back.serialize() == bs.serialize());
  }
}

TEST_CASE("lambda index table") {
  CHECK(lambda_index_for(1e-4) == 0);
  CHECK(lambda_index_for(1.0) == kLambdaTable.size() - 1);
  CHECK(kLambdaTable[lambda_index_for(0.011)] == 1e-2);
}
