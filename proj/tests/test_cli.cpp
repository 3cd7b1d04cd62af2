// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mofc/bitstream.hpp"
#include "mofc/frame.hpp"

using namespace mofc;
using mofc::test::TempDir;

namespace {

#ifndef MOFC_CLI_PATH
#error "MOFC_CLI_PATH must be defined"
#endif
#ifndef MOFC_SYNTH_PATH
#error "MOFC_SYNTH_PATH must be defined"
#endif

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& cmd, const TempDir& td) {
  std::string log = td.str("cmd_output.txt");
  int rc = std::system((cmd + " > " + log + " 2>&1").c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// one shared fixture: dataset + tiny trained checkpoint chain
struct CliFixture {
  TempDir td{"cli"};
  std::string cli = MOFC_CLI_PATH;
  std::string synth = MOFC_SYNTH_PATH;
  std::string data, cfg, ckpt1, ckpt4;

  CliFixture() {
    data = td.str("data");
    RunResult r = run(synth + " --out " + data + " --count 5 --size 32 --seed 3", td);
    REQUIRE(r.exit_code == 0);
    cfg = td.str("cfg.json");
    std::ofstream f(cfg);
    f << R"({"seed": 9, "lambda": 0.02, "mode": "full",
             "widths": {"f": 4, "n": 6, "m": 2},
             "crop": 32, "batch": 3,
             "epochs": {"phase1": 1, "phase2": 2, "phase3": 1},
             "data": {"train_root": "data"},
             "out_dir": ")" +
             td.str("ckpt") + R"("})";
    f.close();
    r = run(cli + " train --config " + cfg + " --threads 2", td);
    REQUIRE(r.exit_code == 0);
    ckpt1 = td.str("ckpt/0.02/1.bin");
    ckpt4 = td.str("ckpt/0.02/4.bin");
  }
};

CliFixture& fixture() {
  static CliFixture fx;
  return fx;
}

}  // namespace

TEST_CASE("train: metrics.csv rows and seeded determinism") {
  auto& fx = fixture();
  std::ifstream f(fx.td.str("ckpt/0.02/metrics.csv"));
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,phase,loss,bpp,ms_ssim");
  int rows = 0;
  std::string first_row;
  while (std::getline(f, line))
    if (!line.empty()) {
      if (rows == 0) first_row = line;
      ++rows;
    }
  CHECK(rows == 4);

  // identical seed, identical first-epoch loss
  TempDir td2("cli_rerun");
  std::string cfg2 = td2.str("cfg.json");
  {
    std::ifstream src(fx.cfg);
    std::stringstream ss;
    ss << src.rdbuf();
    std::string body = ss.str();
    auto pos = body.find(fx.td.str("ckpt"));
    body.replace(pos, fx.td.str("ckpt").size(), td2.str("ckpt"));
    // dataset path is relative in the config; resolve against the original dir
    std::ofstream dst(cfg2);
    dst << body;
  }
  RunResult r =
      run(fx.cli + " train --config " + cfg2 + " --data-root " + fx.td.path().string(), td2);
  REQUIRE(r.exit_code == 0);
  std::ifstream f2(td2.str("ckpt/0.02/metrics.csv"));
  std::string line2;
  std::getline(f2, line2);
  std::getline(f2, line2);
  CHECK(line2 == first_row);
}

TEST_CASE("train: missing config and bad dataset exit 2") {
  auto& fx = fixture();
  RunResult r = run(fx.cli + " train --config " + fx.td.str("nope.json"), fx.td);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("--config") != std::string::npos);

  std::string cfg = fx.td.str("bad_cfg.json");
  {
    std::ofstream f(cfg);
    f << R"({"data": {"train_root": "missing_dir"}})";
  }
  r = run(fx.cli + " train --config " + cfg, fx.td);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("train_root") != std::string::npos);
}

TEST_CASE("encode/decode round trip through files") {
  auto& fx = fixture();
  std::string ref = fx.data + "/seq00000/0.png";
  std::string cur = fx.data + "/seq00000/1.png";
  RunResult r = run(fx.cli + " encode --ref " + ref + " --cur " + cur + " --ckpt " + fx.ckpt4 +
                        " --out " + fx.td.str("s.mofc") + " --recon " + fx.td.str("enc.png"),
                    fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("bpp") != std::string::npos);

  // reported bpp equals payload bits / pixels
  Bitstream bs = Bitstream::load(fx.td.str("s.mofc"));
  double expect_bpp = 8.0 * static_cast<double>(bs.payload_bytes()) / (32.0 * 32.0);
  char expect[64];
  std::snprintf(expect, sizeof(expect), "bpp %.6f", expect_bpp);
  CHECK(r.output.find(expect) != std::string::npos);

  r = run(fx.cli + " decode --ref " + ref + " --stream " + fx.td.str("s.mofc") + " --ckpt " +
              fx.ckpt4 + " --out " + fx.td.str("dec.png"),
          fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(read_file(fx.td.str("enc.png")) == read_file(fx.td.str("dec.png")));

  SUBCASE("skip_only leaves codec slots empty") {
    RunResult r2 = run(fx.cli + " encode --ref " + ref + " --cur " + cur + " --ckpt " + fx.ckpt4 +
                           " --out " + fx.td.str("skip.mofc") + " --mode skip_only",
                       fx.td);
    REQUIRE(r2.exit_code == 0);
    Bitstream skip = Bitstream::load(fx.td.str("skip.mofc"));
    CHECK(skip.payloads[Bitstream::kCodecHyper].empty());
    CHECK(skip.payloads[Bitstream::kCodecMain].empty());
  }
  SUBCASE("corrupt stream exits 1") {
    auto buf = read_file(fx.td.str("s.mofc"));
    std::ofstream f(fx.td.str("bad.mofc"), std::ios::binary);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size() / 3));
    f.close();
    RunResult r2 = run(fx.cli + " decode --ref " + ref + " --stream " + fx.td.str("bad.mofc") +
                           " --ckpt " + fx.ckpt4 + " --out " + fx.td.str("x.png"),
                       fx.td);
    CHECK(r2.exit_code == 1);
  }
  SUBCASE("checkpoint/widths mismatch exits 1") {
    // a checkpoint with different widths: craft by training would be slow;
    // instead corrupt the meta block is involved - simply pass a non-ckpt file
    RunResult r2 = run(fx.cli + " encode --ref " + ref + " --cur " + cur + " --ckpt " + ref +
                           " --out " + fx.td.str("y.mofc"),
                       fx.td);
    CHECK(r2.exit_code == 1);
  }
}

TEST_CASE("eval and rd-curve emit the documented formats") {
  auto& fx = fixture();
  RunResult r = run(fx.cli + " eval --dataset " + fx.data + " --ckpt " + fx.ckpt4 + " --out " +
                        fx.td.str("eval.csv") + " --threads 2",
                    fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("mean bpp") != std::string::npos);
  std::ifstream f(fx.td.str("eval.csv"));
  std::string line;
  std::getline(f, line);
  CHECK(line == "pair,bpp,ms_ssim,ms_ssim_db");

  r = run(fx.cli + " rd-curve --dataset " + fx.data + " --ckpts " + fx.ckpt1 + "," + fx.ckpt4 +
              " --out-csv " + fx.td.str("rd.csv") + " --out-plot " + fx.td.str("rd.png") +
              " --threads 2",
          fx.td);
  REQUIRE(r.exit_code == 0);
  std::ifstream rdcsv(fx.td.str("rd.csv"));
  std::getline(rdcsv, line);
  CHECK(line == "lambda,bpp,ms_ssim,ms_ssim_db");
  int rows = 0;
  while (std::getline(rdcsv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  CHECK(std::ifstream(fx.td.str("rd.png")).good());

  SUBCASE("single checkpoint is a usage error") {
    RunResult r2 = run(fx.cli + " rd-curve --dataset " + fx.data + " --ckpts " + fx.ckpt4 +
                           " --out-csv " + fx.td.str("rd2.csv"),
                       fx.td);
    CHECK(r2.exit_code == 2);
  }
}

TEST_CASE("ablate reproduces the published BD-rate numbers from curves") {
  auto& fx = fixture();
  auto write_curve = [&](const std::string& name, const std::string& body) {
    std::ofstream f(fx.td.str(name));
    f << "bpp,ms_ssim_db\n" << body;
  };
  write_curve("full.csv", "0.034,20.57\n0.070,22.74\n0.109,24.23\n0.164,25.52\n");
  write_curve("residual.csv", "0.040,19.53\n0.071,21.17\n0.115,23.33\n0.181,24.92\n");
  write_curve("codec_only.csv", "0.032,19.81\n0.037,20.22\n0.107,22.57\n0.178,24.23\n");

  // proposed against the residual anchor: the conditional-coding gain
  RunResult r = run(fx.cli + " ablate --curve residual_skip=" + fx.td.str("residual.csv") +
                        " --curve full=" + fx.td.str("full.csv") +
                        " --anchor residual_skip --out " + fx.td.str("rep1"),
                    fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("full: -32.") != std::string::npos);

  // codecnet-only against the proposed anchor: the mode-competition gain
  r = run(fx.cli + " ablate --curve full=" + fx.td.str("full.csv") +
              " --curve codecnet_only=" + fx.td.str("codec_only.csv") + " --anchor full --out " +
              fx.td.str("rep2"),
          fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("codecnet_only: +52.") != std::string::npos);

  SUBCASE("identical curve sets give a zero table") {
    RunResult r2 = run(fx.cli + " ablate --curve full=" + fx.td.str("full.csv") +
                           " --curve again=" + fx.td.str("full.csv") + " --anchor full",
                       fx.td);
    REQUIRE(r2.exit_code == 0);
    CHECK(r2.output.find("again: +0.00%") != std::string::npos);
  }
}

TEST_CASE("diagnose writes the seven panels and the stats line") {
  auto& fx = fixture();
  std::string ref = fx.data + "/seq00001/0.png";
  std::string cur = fx.data + "/seq00001/1.png";
  RunResult r = run(fx.cli + " diagnose --ref " + ref + " --cur " + cur + " --ckpt " + fx.ckpt4 +
                        " --out " + fx.td.str("diag"),
                    fx.td);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("MS-SSIM = ") != std::string::npos);
  CHECK(r.output.find("R_c = ") != std::string::npos);
  CHECK(r.output.find("R_m = ") != std::string::npos);
  CHECK(r.output.find(" bpp") != std::string::npos);
  for (const char* name : {"alpha.png", "flow.png", "codec_in.png", "skip_in.png",
                           "rate_codec.png", "rate_mof.png", "recon.png"}) {
    CAPTURE(name);
    CHECK(std::ifstream(fx.td.str(std::string("diag/") + name)).good());
  }
}
