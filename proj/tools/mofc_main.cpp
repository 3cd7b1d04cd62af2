// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
//
// mofc: learned P-frame codec driver.
//
// Subcommands: train, encode, decode, eval, rd-curve, ablate, diagnose.
// Exit codes: 0 success, 1 runtime/contract failure, 2 usage/config failure.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mofc/mofc.hpp"

namespace fs = std::filesystem;
using namespace mofc;

namespace {

using Model = PFrameModel<float>;

std::unique_ptr<Model> load_model(const std::string& ckpt_path, CheckpointMeta* meta_out) {
  CheckpointMeta meta = peek_checkpoint_meta(ckpt_path);
  auto model = std::make_unique<Model>(meta.widths, meta.codec_widths);
  load_checkpoint(ckpt_path, model->bank);
  if (meta_out) *meta_out = meta;
  return model;
}

FramePairT<float> load_pair_ycbcr(const std::string& ref_path, const std::string& cur_path) {
  FramePairT<float> pair{rgb_to_ycbcr(load_frame<float>(ref_path)),
                         rgb_to_ycbcr(load_frame<float>(cur_path))};
  pair.validate();
  return pair;
}

void save_ycbcr_png(const std::string& path, const Tensor<float>& data) {
  save_frame(path, ycbcr_to_rgb(FrameT<float>(data, Colorspace::YCbCr)));
}

void save_gray_png(const std::string& path, const Tensor<double>& map, double scale_to_max = 0) {
  double mx = scale_to_max;
  if (mx <= 0) {
    for (auto v : map.data) mx = std::max(mx, v);
    if (mx <= 0) mx = 1;
  }
  Tensor<float> rgb(shape3(3, map.dim(1), map.dim(2)));
  std::size_t plane = map.size();
  for (std::size_t i = 0; i < plane; ++i) {
    float v = static_cast<float>(clamp_val(map[i] / mx, 0.0, 1.0));
    rgb[i] = v;
    rgb[plane + i] = v;
    rgb[2 * plane + i] = v;
  }
  save_frame(path, FrameT<float>(std::move(rgb), Colorspace::RGB));
}

// deterministic parallel map over pair indices; results land in index order
template <typename Fn>
void parallel_pairs(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

RDCurve curve_over_dataset(const std::vector<std::string>& ckpts,
                           const DirectoryDataset<float>& data, SystemMode mode, int threads,
                           std::vector<std::array<double, 4>>* rows) {
  std::vector<RDCurve::Point> pts;
  for (const auto& ck : ckpts) {
    CheckpointMeta meta;
    auto model = load_model(ck, &meta);
    std::vector<RDPoint> rp(data.size());
    parallel_pairs(data.size(), threads,
                   [&](std::size_t i) { rp[i] = evaluate_pair(data.get(i), *model, mode); });
    double bpp = 0, ssim = 0;
    for (const auto& p : rp) {
      bpp += p.bpp;
      ssim += p.ms_ssim;
    }
    bpp /= static_cast<double>(rp.size());
    ssim /= static_cast<double>(rp.size());
    double db = ms_ssim_db(ssim);
    pts.push_back({bpp, db});
    if (rows) rows->push_back({meta.lambda, bpp, ssim, db});
  }
  return RDCurve::from_points(std::move(pts), &std::cerr);
}

int require_exists(const std::string& path, const char* flag) {
  if (!fs::exists(path)) {
    std::cerr << "error: " << flag << " path does not exist: " << path << "\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, std::uint64_t seed_override, double lambda_override,
              const std::string& mode_override, const std::string& out_override,
              const std::string& data_root, int threads) {
  if (int rc = require_exists(config_path, "--config")) return rc;
  Config cfg;
  try {
    cfg = Config::load(config_path);
    if (seed_override != static_cast<std::uint64_t>(-1)) cfg.seed = seed_override;
    if (lambda_override > 0) cfg.lambda = lambda_override;
    if (!mode_override.empty()) cfg.mode = system_mode_from(mode_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
  } catch (const error& e) {
    std::cerr << "error: invalid --config: " << e.what() << "\n";
    return 2;
  }
  if (cfg.train_root.empty()) {
    std::cerr << "error: config is missing data.train_root (see --config)\n";
    return 2;
  }
  std::string root = cfg.resolve_data_path(cfg.train_root, data_root);
  if (!fs::exists(fs::path(root) / "manifest.json")) {
    std::cerr << "error: no manifest.json under data.train_root: " << root << "\n";
    return 2;
  }

  Manifest manifest = Manifest::load((fs::path(root) / "manifest.json").string());
  DirectoryDataset<float> data(root, manifest);
  Model model(cfg.widths, cfg.codec_widths_set ? cfg.codec_widths : cfg.widths);
  model.initialize(cfg.seed);
  TrainSchedule sched = cfg.final_schedule();
  std::printf("training: %zu pairs, %d epochs (%d/%d/%d), lambda=%g, mode=%s\n", data.size(),
              (sched.desk_scale ? sched.desk() : sched).total_epochs(),
              (sched.desk_scale ? sched.desk() : sched).phase1_epochs,
              (sched.desk_scale ? sched.desk() : sched).phase2_epochs,
              (sched.desk_scale ? sched.desk() : sched).phase3_epochs, sched.lambda,
              to_string(sched.mode));
  run_training(model, sched, data, cfg.out_dir,
               [](const EpochStats& st) {
                 std::printf("epoch %3d phase %d  loss %.6f  bpp %.4f  ms-ssim %.4f  lr %.2e\n",
                             st.epoch, st.phase, st.loss, st.bpp, st.ms_ssim, st.lr);
                 std::fflush(stdout);
               },
               threads);
  std::printf("checkpoints + metrics.csv under %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_encode(const std::string& ref_path, const std::string& cur_path, const std::string& ckpt,
               const std::string& out_path, const std::string& mode_s,
               const std::string& recon_dump) {
  for (auto [p, f] : {std::pair{ref_path, "--ref"}, {cur_path, "--cur"}, {ckpt, "--ckpt"}})
    if (int rc = require_exists(p, f)) return rc;
  CheckpointMeta meta;
  auto model = load_model(ckpt, &meta);
  SystemMode mode = system_mode_from(mode_s.empty() ? meta.mode : mode_s);
  auto pair = load_pair_ycbcr(ref_path, cur_path);
  auto [bs, res] = encode_pframe(pair, *model, mode, meta.lambda);
  bs.save(out_path);
  double px = static_cast<double>(pair.reference.height()) * pair.reference.width();
  std::printf("bpp %.6f\n", 8.0 * static_cast<double>(bs.payload_bytes()) / px);
  std::printf("estimated: R_m %.1f bits, R_c %.1f bits (%.6f bpp total)\n", res.rate_m, res.rate_c,
              res.rate_total / px);
  if (!recon_dump.empty()) save_ycbcr_png(recon_dump, res.recon.data);
  return 0;
}

int cmd_decode(const std::string& ref_path, const std::string& stream_path,
               const std::string& ckpt, const std::string& out_path, const std::string& mode_s) {
  for (auto [p, f] : {std::pair{ref_path, "--ref"}, {stream_path, "--stream"}, {ckpt, "--ckpt"}})
    if (int rc = require_exists(p, f)) return rc;
  CheckpointMeta meta;
  auto model = load_model(ckpt, &meta);
  SystemMode mode = system_mode_from(mode_s.empty() ? meta.mode : mode_s);
  FrameT<float> ref = rgb_to_ycbcr(load_frame<float>(ref_path));
  Bitstream bs = Bitstream::load(stream_path);
  FrameT<float> recon = decode_pframe(ref, bs, *model, mode);
  save_ycbcr_png(out_path, recon.data);
  std::printf("decoded %dx%d to %s\n", recon.width(), recon.height(), out_path.c_str());
  return 0;
}

int cmd_eval(const std::string& dataset, const std::string& ckpt, const std::string& mode_s,
             const std::string& out_csv, int threads) {
  if (int rc = require_exists(dataset, "--dataset")) return rc;
  if (int rc = require_exists(ckpt, "--ckpt")) return rc;
  Manifest manifest = Manifest::load((fs::path(dataset) / "manifest.json").string());
  DirectoryDataset<float> data(dataset, manifest);
  CheckpointMeta meta;
  auto model = load_model(ckpt, &meta);
  SystemMode mode = system_mode_from(mode_s.empty() ? meta.mode : mode_s);
  std::vector<RDPoint> rp(data.size());
  parallel_pairs(data.size(), threads,
                 [&](std::size_t i) { rp[i] = evaluate_pair(data.get(i), *model, mode); });
  double bpp = 0, ssim = 0;
  for (const auto& p : rp) {
    bpp += p.bpp;
    ssim += p.ms_ssim;
  }
  bpp /= static_cast<double>(rp.size());
  ssim /= static_cast<double>(rp.size());
  std::printf("pairs %zu  mean bpp %.6f  mean ms-ssim %.6f  ms-ssim-db %.3f\n", rp.size(), bpp,
              ssim, ms_ssim_db(ssim));
  if (!out_csv.empty()) {
    std::ofstream f(out_csv);
    f << "pair,bpp,ms_ssim,ms_ssim_db\n";
    for (std::size_t i = 0; i < rp.size(); ++i)
      f << i << ',' << rp[i].bpp << ',' << rp[i].ms_ssim << ',' << rp[i].ms_ssim_db << '\n';
  }
  return 0;
}

int cmd_rd_curve(const std::string& dataset, const std::vector<std::string>& ckpts,
                 const std::string& mode_s, const std::string& out_csv,
                 const std::string& out_plot, int threads) {
  if (int rc = require_exists(dataset, "--dataset")) return rc;
  if (ckpts.size() < 2) {
    std::cerr << "error: --ckpts needs at least two checkpoints for a curve\n";
    return 2;
  }
  for (const auto& c : ckpts)
    if (int rc = require_exists(c, "--ckpts")) return rc;
  Manifest manifest = Manifest::load((fs::path(dataset) / "manifest.json").string());
  DirectoryDataset<float> data(dataset, manifest);
  SystemMode mode = mode_s.empty() ? SystemMode::full : system_mode_from(mode_s);
  std::vector<std::array<double, 4>> rows;
  RDCurve curve = curve_over_dataset(ckpts, data, mode, threads, &rows);
  std::ofstream f(out_csv);
  if (!f) throw io_error("cannot write: " + out_csv);
  f << "lambda,bpp,ms_ssim,ms_ssim_db\n";
  for (const auto& r : rows) f << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[3] << '\n';
  std::printf("wrote %s (%zu points)\n", out_csv.c_str(), rows.size());
  if (!out_plot.empty()) {
    LinePlot plot;
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curve.points) pts.push_back({p.bpp, p.quality_db});
    plot.add_series(std::move(pts), 180, 30, 30);
    plot.save(out_plot);
    std::printf("wrote %s\n", out_plot.c_str());
  }
  return 0;
}

int cmd_ablate(const std::string& dataset, const std::vector<std::string>& sets,
               const std::vector<std::string>& curves, const std::string& anchor_name,
               const std::string& out_prefix, int threads) {
  std::vector<std::pair<std::string, RDCurve>> named;
  auto split_kv = [](const std::string& s) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw contract_error("expected name=value, got: " + s);
    return std::pair{s.substr(0, eq), s.substr(eq + 1)};
  };
  try {
    for (const auto& c : curves) {
      auto [name, path] = split_kv(c);
      named.emplace_back(name, RDCurve::load_csv(path));
    }
    if (!sets.empty()) {
      if (int rc = require_exists(dataset, "--dataset")) return rc;
      Manifest manifest = Manifest::load((fs::path(dataset) / "manifest.json").string());
      DirectoryDataset<float> data(dataset, manifest);
      for (const auto& s : sets) {
        auto [name, list] = split_kv(s);
        std::vector<std::string> ckpts;
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ',')) ckpts.push_back(item);
        if (ckpts.size() < 2) {
          std::cerr << "error: --set " << name << " needs at least two checkpoints\n";
          return 2;
        }
        SystemMode mode = system_mode_from(name);
        named.emplace_back(name, curve_over_dataset(ckpts, data, mode, threads, nullptr));
      }
    }
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (named.size() < 2) {
    std::cerr << "error: ablate needs an anchor and at least one other curve "
                 "(--set/--curve)\n";
    return 2;
  }
  std::string anchor = anchor_name;
  if (anchor.empty()) anchor = named.front().first;
  const RDCurve* anchor_curve = nullptr;
  for (const auto& [n, c] : named)
    if (n == anchor) anchor_curve = &c;
  if (!anchor_curve) {
    std::cerr << "error: anchor '" << anchor << "' not among the provided curves\n";
    return 2;
  }

  nlohmann::json report;
  report["anchor"] = anchor;
  report["bd_rate_percent"] = nlohmann::json::object();
  std::ostringstream text;
  text << "BD-rate vs anchor '" << anchor << "' (negative = saves rate)\n";
  for (const auto& [name, curve] : named) {
    if (name == anchor) continue;
    std::string cell;
    try {
      double r = bd_rate(*anchor_curve, curve);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%+.2f%%", r);
      cell = buf;
      report["bd_rate_percent"][name] = r;
    } catch (const contract_error& e) {
      cell = "N/A";
      report["bd_rate_percent"][name] = nullptr;
      std::cerr << "note: " << name << ": " << e.what() << "\n";
    }
    text << "  " << name << ": " << cell << "\n";
  }
  std::cout << text.str();
  if (!out_prefix.empty()) {
    std::ofstream tf(out_prefix + ".txt");
    tf << text.str();
    std::ofstream jf(out_prefix + ".json");
    jf << report.dump(2) << "\n";
    std::printf("wrote %s.txt and %s.json\n", out_prefix.c_str(), out_prefix.c_str());
  }
  return 0;
}

int cmd_diagnose(const std::string& ref_path, const std::string& cur_path,
                 const std::string& ckpt, const std::string& out_dir, const std::string& mode_s) {
  for (auto [p, f] : {std::pair{ref_path, "--ref"}, {cur_path, "--cur"}, {ckpt, "--ckpt"}})
    if (int rc = require_exists(p, f)) return rc;
  CheckpointMeta meta;
  auto model = load_model(ckpt, &meta);
  SystemMode mode = system_mode_from(mode_s.empty() ? meta.mode : mode_s);
  auto pair = load_pair_ycbcr(ref_path, cur_path);
  fs::create_directories(out_dir);
  auto [bs, res] = encode_pframe(pair, *model, mode, meta.lambda);

  auto out = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  // alpha map: black = skip, white = conditional coding
  Tensor<double> alpha_d = res.alpha.template cast<double>();
  save_gray_png(out("alpha.png"), alpha_d, 1.0);
  save_frame(out("flow.png"), flow_to_color(res.flow));
  // masked inputs, in color (zeroed areas land on the chroma-neutral green)
  {
    std::size_t plane = static_cast<std::size_t>(pair.current.height()) * pair.current.width();
    Tensor<float> codec_in(pair.current.data.dims), skip_in(pair.current.data.dims);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        codec_in[c * plane + i] = res.alpha[i] * pair.current.data[c * plane + i];
        skip_in[c * plane + i] = (1.0f - res.alpha[i]) * res.pred[c * plane + i];
      }
    save_ycbcr_png(out("codec_in.png"), codec_in);
    save_ycbcr_png(out("skip_in.png"), skip_in);
  }
  save_gray_png(out("rate_codec.png"), res.rate_map_codec);
  save_gray_png(out("rate_mof.png"), res.rate_map_mof);
  save_ycbcr_png(out("recon.png"), res.recon.data);

  double px = static_cast<double>(pair.reference.height()) * pair.reference.width();
  double ssim = static_cast<double>(ms_ssim(res.recon.data, pair.current.data));
  std::printf("MS-SSIM = %.3f, R_c = %.3f bpp, R_m = %.3f bpp\n", ssim, res.rate_c / px,
              res.rate_m / px);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mofc: learned P-frame video codec (MOFNet + CodecNet)"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  std::string config_path, mode_override, out_override, data_root;
  std::uint64_t seed_override = static_cast<std::uint64_t>(-1);
  double lambda_override = -1;
  int threads = 1;
  train->add_option("--config", config_path, "config file (JSON)")->required();
  train->add_option("--seed", seed_override, "override config seed");
  train->add_option("--lambda", lambda_override, "override config lambda");
  train->add_option("--mode", mode_override,
                    "override mode: full|codecnet_only|skip_only|residual_skip");
  train->add_option("--out", out_override, "override checkpoint directory");
  train->add_option("--data-root", data_root, "base directory for relative dataset paths");
  train->add_option("--threads", threads, "worker threads per batch");

  // encode
  auto* enc = app.add_subcommand("encode", "encode a frame pair to a bitstream");
  std::string ref_path, cur_path, ckpt_path, out_path, recon_dump, stream_path, mode_flag;
  enc->add_option("--ref", ref_path, "reference frame (png)")->required();
  enc->add_option("--cur", cur_path, "current frame (png)")->required();
  enc->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  enc->add_option("--out", out_path, "output bitstream path")->required();
  enc->add_option("--mode", mode_flag, "coding mode (default: checkpoint mode)");
  enc->add_option("--recon", recon_dump, "dump encoder-side reconstruction (png)");

  // decode
  auto* dec = app.add_subcommand("decode", "decode a bitstream against a reference frame");
  dec->add_option("--ref", ref_path, "reference frame (png)")->required();
  dec->add_option("--stream", stream_path, "bitstream path")->required();
  dec->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  dec->add_option("--out", out_path, "output frame (png)")->required();
  dec->add_option("--mode", mode_flag, "coding mode (default: checkpoint mode)");

  // eval
  auto* ev = app.add_subcommand("eval", "rate/quality over a dataset");
  std::string dataset, out_csv;
  ev->add_option("--dataset", dataset, "dataset root (with manifest.json)")->required();
  ev->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  ev->add_option("--mode", mode_flag, "coding mode (default: checkpoint mode)");
  ev->add_option("--out", out_csv, "per-pair CSV output");
  ev->add_option("--threads", threads, "evaluation threads");

  // rd-curve
  auto* rd = app.add_subcommand("rd-curve", "rate-distortion curve over checkpoints");
  std::vector<std::string> ckpt_list;
  std::string out_plot;
  rd->add_option("--dataset", dataset, "dataset root")->required();
  rd->add_option("--ckpts", ckpt_list, "ordered checkpoint list")->required()->delimiter(',');
  rd->add_option("--mode", mode_flag, "coding mode (default: full)");
  rd->add_option("--out-csv", out_csv, "output CSV")->required();
  rd->add_option("--out-plot", out_plot, "output plot (png)");
  rd->add_option("--threads", threads, "evaluation threads");

  // ablate
  auto* ab = app.add_subcommand("ablate", "BD-rate of variants against an anchor");
  std::vector<std::string> set_args, curve_args;
  std::string anchor_name, out_prefix;
  ab->add_option("--dataset", dataset, "dataset root (needed with --set)");
  ab->add_option("--set", set_args, "mode=ckpt1,ckpt2,... (evaluated curve)");
  ab->add_option("--curve", curve_args, "name=file.csv (precomputed curve)");
  ab->add_option("--anchor", anchor_name, "anchor curve name (default: first)");
  ab->add_option("--out", out_prefix, "report prefix (.txt/.json)");
  ab->add_option("--threads", threads, "evaluation threads");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "per-pair behavior dumps (alpha, flow, rate maps)");
  std::string diag_out;
  diag->add_option("--ref", ref_path, "reference frame (png)")->required();
  diag->add_option("--cur", cur_path, "current frame (png)")->required();
  diag->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  diag->add_option("--out", diag_out, "output directory")->required();
  diag->add_option("--mode", mode_flag, "coding mode (default: checkpoint mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train))
      return cmd_train(config_path, seed_override, lambda_override, mode_override, out_override,
                       data_root, threads);
    if (app.got_subcommand(enc))
      return cmd_encode(ref_path, cur_path, ckpt_path, out_path, mode_flag, recon_dump);
    if (app.got_subcommand(dec))
      return cmd_decode(ref_path, stream_path, ckpt_path, out_path, mode_flag);
    if (app.got_subcommand(ev)) return cmd_eval(dataset, ckpt_path, mode_flag, out_csv, threads);
    if (app.got_subcommand(rd))
      return cmd_rd_curve(dataset, ckpt_list, mode_flag, out_csv, out_plot, threads);
    if (app.got_subcommand(ab))
      return cmd_ablate(dataset, set_args, curve_args, anchor_name, out_prefix, threads);
    if (app.got_subcommand(diag))
      return cmd_diagnose(ref_path, cur_path, ckpt_path, diag_out, mode_flag);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
