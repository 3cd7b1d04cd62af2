// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mofc/trainer.hpp"

using namespace mofc;
using mofc::test::TempDir;

namespace {

const Widths kMiniWidths{4, 6, 2};

TrainSchedule mini_schedule(double lambda = 0.02) {
  TrainSchedule s;
  s.phase1_epochs = 1;
  s.phase2_epochs = 2;
  s.phase3_epochs = 2;
  s.lambda = lambda;
  s.crop = 16;
  s.batch = 4;
  s.seed = 5;
  return s;
}

template <typename T>
bool prefix_params_equal(const ParamBank<T>& a, const ParamBank<T>& b, const char* prefix) {
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].name.rfind(prefix, 0) != 0) continue;
    if (a.entries[i].tensor->data != b.entries[i].tensor->data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("rd loss arithmetic") {
  SUBCASE("perfect reconstruction at zero rate is zero") {
    Rng rng(81);
    Tensor<double> f(shape3(3, 32, 32));
    for (auto& v : f.data) v = rng.uniform();
    CHECK(rd_loss(f, f, 0.0, 0.0, 1.0, 1024) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("reported operating point composes to 0.059") {
    std::size_t px = 1000000;
    double loss = rd_loss_from_distortion(1.0 - 0.982, 0.019 * static_cast<double>(px),
                                          0.022 * static_cast<double>(px), 1.0, px);
    CHECK(loss == doctest::Approx(0.059).epsilon(1e-9));
  }
  SUBCASE("lambda zero reduces to distortion") {
    Rng rng(82);
    Tensor<double> a(shape3(3, 32, 32)), b(shape3(3, 32, 32));
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = clamp_val(rng.uniform() * 0.1 + 0.45, 0.0, 1.0);
    double l = rd_loss(a, b, 12345.0, 999.0, 0.0, 1024);
    CHECK(l == doctest::Approx(1.0 - ms_ssim(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("phase-1 alpha mask definition") {
  auto m = phase1_alpha_mask<double>(4, 4);
  for (int y = 0; y < 4; ++y) {
    CHECK(m.at3(0, y, 0) == 1.0);
    CHECK(m.at3(0, y, 1) == 1.0);
    CHECK(m.at3(0, y, 2) == 0.0);
    CHECK(m.at3(0, y, 3) == 0.0);
  }
  CHECK(phase1_alpha_mask<double>(6, 8).sum() == doctest::Approx(24.0));
  auto odd = phase1_alpha_mask<double>(3, 5);
  CHECK(odd.sum() == doctest::Approx(6.0));  // 2 columns of ones
  CHECK(odd.sum() / odd.size() == doctest::Approx(0.4));
}

TEST_CASE("learning-rate schedule endpoints and shape") {
  TrainSchedule s;
  s.phase1_epochs = 5;
  s.phase2_epochs = 45;
  s.phase3_epochs = 20;
  CHECK(s.total_epochs() == 70);
  CHECK(s.lr_at(0) == doctest::Approx(1e-4));
  CHECK(s.lr_at(4) == doctest::Approx(1e-4));
  CHECK(s.lr_at(5) == doctest::Approx(1e-4));
  CHECK(s.lr_at(49) == doctest::Approx(1e-4));
  CHECK(s.lr_at(50) == doctest::Approx(1e-4));  // phase-3 start
  CHECK(s.lr_at(69) == doctest::Approx(4e-6));  // final epoch
  for (int e = 50; e < 69; ++e) CHECK(s.lr_at(e) >= s.lr_at(e + 1));
  // pure function: same input, same output
  CHECK(s.lr_at(57) == s.lr_at(57));
  CHECK(s.phase_of(0) == 1);
  CHECK(s.phase_of(4) == 1);
  CHECK(s.phase_of(5) == 2);
  CHECK(s.phase_of(49) == 2);
  CHECK(s.phase_of(50) == 3);
}

TEST_CASE("phase-2 alternation freezes exactly one network per epoch") {
  TempDir td("alt");
  PFrameModel<float> model(kMiniWidths);
  model.initialize(3);
  SyntheticTranslationDataset<float> data(8, 16, 1.5, 11);
  auto sched = mini_schedule();
  auto result = run_training(model, sched, data, td.str("run"));
  REQUIRE(result.checkpoints.size() == 5);

  // reload consecutive checkpoints and compare parameter groups
  auto load = [&](std::size_t i) {
    auto m = std::make_unique<PFrameModel<float>>(kMiniWidths);
    load_checkpoint(result.checkpoints[i], m->bank);
    return m;
  };
  auto e1 = load(0), e2 = load(1), e3 = load(2), e4 = load(3);
  // epoch 2 (first phase-2 epoch): MOFNet updates, codec frozen
  CHECK_FALSE(prefix_params_equal(e1->bank, e2->bank, "mofnet"));
  CHECK(prefix_params_equal(e1->bank, e2->bank, "codecnet"));
  // epoch 3: reversed
  CHECK(prefix_params_equal(e2->bank, e3->bank, "mofnet"));
  CHECK_FALSE(prefix_params_equal(e2->bank, e3->bank, "codecnet"));
  // epoch 4 (phase 3): both move
  CHECK_FALSE(prefix_params_equal(e3->bank, e4->bank, "mofnet"));
  CHECK_FALSE(prefix_params_equal(e3->bank, e4->bank, "codecnet"));
  // the unused residual branch never moves
  CHECK(prefix_params_equal(e1->bank, e4->bank, "residual"));

  SUBCASE("metrics.csv has one row per epoch") {
    std::ifstream f(td.str("run/0.02/metrics.csv"));
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);
    CHECK(line == "epoch,phase,loss,bpp,ms_ssim");
    int rows = 0;
    while (std::getline(f, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 5);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  SyntheticTranslationDataset<float> data(6, 16, 1.5, 21);
  auto sched = mini_schedule();
  sched.phase1_epochs = 1;
  sched.phase2_epochs = 0;
  sched.phase3_epochs = 0;
  PFrameModel<float> m1(kMiniWidths), m2(kMiniWidths);
  m1.initialize(4);
  m2.initialize(4);
  auto r1 = run_training(m1, sched, data, "");
  auto r2 = run_training(m2, sched, data, "");
  REQUIRE(r1.history.size() == 1);
  CHECK(r1.history[0].loss == r2.history[0].loss);
  for (std::size_t i = 0; i < m1.bank.entries.size(); ++i)
    CHECK(m1.bank.entries[i].tensor->data == m2.bank.entries[i].tensor->data);

  SUBCASE("two worker threads reproduce the single-thread run") {
    PFrameModel<float> m3(kMiniWidths);
    m3.initialize(4);
    auto r3 = run_training(m3, sched, data, "", nullptr, 2);
    CHECK(r3.history[0].loss == r1.history[0].loss);
    for (std::size_t i = 0; i < m1.bank.entries.size(); ++i)
      CHECK(m1.bank.entries[i].tensor->data == m3.bank.entries[i].tensor->data);
  }
}

TEST_CASE("empty dataset and poisoned parameters abort cleanly") {
  PFrameModel<float> model(kMiniWidths);
  model.initialize(5);
  SUBCASE("empty dataset") {
    class Empty : public PairSource<float> {
     public:
      std::size_t size() const override { return 0; }
      FramePairT<float> get(std::size_t) const override { throw contract_error("empty"); }
    } empty;
    CHECK_THROWS_AS(run_training(model, mini_schedule(), empty, ""), contract_error);
  }
  SUBCASE("non-finite loss writes a diagnostic checkpoint and aborts") {
    TempDir td("nan");
    model.bank.entries[0].tensor->data[0] = std::numeric_limits<float>::quiet_NaN();
    SyntheticTranslationDataset<float> data(4, 16, 1.5, 31);
    CHECK_THROWS_AS(run_training(model, mini_schedule(), data, td.str("run")), training_error);
    CHECK(std::filesystem::exists(td.str("run/0.02/diagnostic.bin")));
  }
}

TEST_CASE("gradient reaches mofnet through warp and blend") {
  // double-precision micro model on an 8x8 pair
  PFrameModel<double> model(Widths{3, 4, 2});
  model.initialize(17);
  SyntheticTranslationDataset<double> data(1, 16, 1.0, 41);
  auto pair_full = data.get(0);
  Rng crop_rng(1);
  auto pair = sample_crop_pair(pair_full, 8, crop_rng);

  TrainSchedule sched;
  sched.phase1_epochs = 0;
  sched.phase2_epochs = 0;
  sched.phase3_epochs = 1;
  sched.lambda = 0.05;
  sched.crop = 8;
  sched.batch = 1;
  auto outcome = train_sample_pass(model, pair, sched, 0, 99);
  double mof_grad_mag = 0;
  for (std::size_t i = 0; i < model.bank.entries.size(); ++i) {
    if (model.bank.entries[i].name.rfind("mofnet", 0) != 0) continue;
    if (outcome.grads[i].dims.empty()) continue;
    for (auto g : outcome.grads[i].data) mof_grad_mag += std::abs(g);
  }
  CHECK(mof_grad_mag > 0.0);
}

TEST_CASE("desk-scale mini run: final loss at or below the phase-1 loss") {
  // shrunk version of the desk experiment to keep unit tests quick
  PFrameModel<float> model(kMiniWidths);
  model.initialize(23);
  SyntheticTranslationDataset<float> data(24, 16, 1.0, 51);
  TrainSchedule sched = mini_schedule(0.01);
  sched.phase1_epochs = 1;
  sched.phase2_epochs = 2;
  sched.phase3_epochs = 2;
  sched.batch = 4;
  auto result = run_training(model, sched, data, "", nullptr, 2);
  REQUIRE(result.history.size() == 5);
  double after_phase1 = result.history[0].loss;
  double final_loss = result.history.back().loss;
  CHECK(final_loss <= after_phase1);
}
