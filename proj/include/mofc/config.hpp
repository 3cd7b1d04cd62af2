// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mofc/system.hpp"
#include "mofc/trainer.hpp"

namespace mofc {

// Declarative run configuration (JSON). Relative dataset paths resolve against
// --data-root, then $MOFC_DATA_ROOT, then the config file's directory.
struct Config {
  std::uint64_t seed = 1;
  double lambda = 0.01;
  SystemMode mode = SystemMode::full;
  Widths widths{32, 48, 32};
  Widths codec_widths{32, 48, 32};
  bool codec_widths_set = false;
  TrainSchedule schedule;
  std::string train_root;
  std::string val_root;
  std::string out_dir = "ckpt";
  std::string base_dir;  // directory of the config file

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config: " + path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw format_error("config parse error: " + std::string(e.what()));
    }
    Config c;
    c.base_dir = std::filesystem::path(path).parent_path().string();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
    if (j.contains("mode")) c.mode = system_mode_from(j["mode"].get<std::string>());
    if (j.contains("widths")) {
      c.widths.f = j["widths"].value("f", c.widths.f);
      c.widths.n = j["widths"].value("n", c.widths.n);
      c.widths.m = j["widths"].value("m", c.widths.m);
    }
    if (j.contains("codec_widths")) {
      c.codec_widths.f = j["codec_widths"].value("f", c.widths.f);
      c.codec_widths.n = j["codec_widths"].value("n", c.widths.n);
      c.codec_widths.m = j["codec_widths"].value("m", c.widths.m);
      c.codec_widths_set = true;
    }
    if (j.contains("epochs")) {
      c.schedule.phase1_epochs = j["epochs"].value("phase1", c.schedule.phase1_epochs);
      c.schedule.phase2_epochs = j["epochs"].value("phase2", c.schedule.phase2_epochs);
      c.schedule.phase3_epochs = j["epochs"].value("phase3", c.schedule.phase3_epochs);
    }
    if (j.contains("lr")) {
      c.schedule.lr_initial = j["lr"].value("initial", c.schedule.lr_initial);
      c.schedule.lr_final = j["lr"].value("final", c.schedule.lr_final);
    }
    c.schedule.crop = j.value("crop", c.schedule.crop);
    c.schedule.batch = j.value("batch", c.schedule.batch);
    c.schedule.desk_scale = j.value("desk_scale", false);
    if (j.contains("data")) {
      c.train_root = j["data"].value("train_root", "");
      c.val_root = j["data"].value("val_root", "");
    }
    c.out_dir = j.value("out_dir", c.out_dir);
    c.widths.validate();
    return c;
  }

  // finalize schedule fields that mirror the top-level config
  TrainSchedule final_schedule() const {
    TrainSchedule s = schedule;
    s.lambda = lambda;
    s.seed = seed;
    s.mode = mode;
    return s;
  }

  std::string resolve_data_path(const std::string& p, const std::string& flag_root) const {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    if (!flag_root.empty()) return (std::filesystem::path(flag_root) / fp).string();
    if (const char* env = std::getenv("MOFC_DATA_ROOT"))
      return (std::filesystem::path(env) / fp).string();
    if (!base_dir.empty()) return (std::filesystem::path(base_dir) / fp).string();
    return p;
  }
};

}  // namespace mofc
