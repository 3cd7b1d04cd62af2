// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "mofc/checkpoint.hpp"
#include "mofc/dataset.hpp"
#include "mofc/loss.hpp"
#include "mofc/optimizer.hpp"
#include "mofc/system.hpp"

namespace mofc {

// Three-phase schedule:
//   phase 1: alpha frozen to the half-frame mask, both networks update
//   phase 2: alternate epochs, one network frozen at a time (MOFNet first)
//   phase 3: joint, learning rate cosine-decays from lr_initial to lr_final
struct TrainSchedule {
  int phase1_epochs = 5;
  int phase2_epochs = 45;
  int phase3_epochs = 20;
  double lr_initial = 1e-4;
  double lr_final = 4e-6;
  double lambda = 0.01;
  int crop = 256;
  int batch = 8;
  std::uint64_t seed = 1;
  SystemMode mode = SystemMode::full;
  bool desk_scale = false;
  double grad_clip = 0;  // global L2 norm cap; 0 disables

  void validate() const {
    if (phase1_epochs < 0 || phase2_epochs < 0 || phase3_epochs < 0)
      throw contract_error("schedule: negative epoch count");
    if (lr_final > lr_initial) throw contract_error("schedule: lr_final above lr_initial");
    if (lambda <= 0) throw contract_error("schedule: lambda must be positive");
    if (batch < 1 || crop < 1) throw contract_error("schedule: bad batch or crop");
  }

  // desk-scale variant: 2/6/4 epochs on 64-pixel crops
  TrainSchedule desk() const {
    TrainSchedule s = *this;
    s.phase1_epochs = 2;
    s.phase2_epochs = 6;
    s.phase3_epochs = 4;
    s.crop = 64;
    s.desk_scale = true;
    return s;
  }

  int total_epochs() const { return phase1_epochs + phase2_epochs + phase3_epochs; }

  int phase_of(int epoch0) const {
    if (epoch0 < phase1_epochs) return 1;
    if (epoch0 < phase1_epochs + phase2_epochs) return 2;
    return 3;
  }

  // pure function of the epoch index
  double lr_at(int epoch0) const {
    if (phase_of(epoch0) != 3) return lr_initial;
    int k = epoch0 - phase1_epochs - phase2_epochs;
    int last = phase3_epochs - 1;
    if (last <= 0) return lr_final;
    if (k >= last) return lr_final;
    double c = 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(k) /
                                     static_cast<double>(last)));
    return lr_final + (lr_initial - lr_final) * c;
  }

  // which parameter prefixes update during this epoch
  bool mofnet_active(int epoch0) const {
    int ph = phase_of(epoch0);
    if (ph == 2) return (epoch0 - phase1_epochs) % 2 == 0;  // MOFNet trains first
    return true;
  }
  bool codec_active(int epoch0) const {
    int ph = phase_of(epoch0);
    if (ph == 2) return (epoch0 - phase1_epochs) % 2 == 1;
    return true;
  }
};

// Phase-1 mask: columns [0, W/2) are one (CodecNet side), the rest zero.
template <typename T>
Tensor<T> phase1_alpha_mask(int h, int w) {
  Tensor<T> m(shape3(1, h, w));
  int half = w / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at3(0, y, x) = x < half ? T(1) : T(0);
  return m;
}

struct EpochStats {
  int epoch = 0;  // 1-based in reports
  int phase = 0;
  double loss = 0;
  double bpp = 0;
  double ms_ssim = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::vector<std::string> checkpoints;
};

namespace detail {

// codec-side prefix that trains in the given mode
inline const char* codec_prefix_for(SystemMode mode) {
  return mode == SystemMode::residual_skip ? "residual" : "codecnet";
}

inline bool has_prefix(const std::string& name, const char* prefix) {
  return name.rfind(prefix, 0) == 0;
}

}  // namespace detail

// One sample's contribution: loss pieces plus per-entry gradients.
template <typename T>
struct SampleOutcome {
  double loss = 0, bpp = 0, msssim = 0;
  std::vector<Tensor<T>> grads;  // aligned with bank entries; empty = none
};

template <typename T>
SampleOutcome<T> train_sample_pass(const PFrameModel<T>& model, const FramePairT<T>& pair,
                                   const TrainSchedule& sched, int epoch0,
                                   std::uint64_t noise_seed) {
  bool mof_on = sched.mofnet_active(epoch0);
  bool codec_on = sched.codec_active(epoch0);
  const char* codec_prefix = detail::codec_prefix_for(sched.mode);
  auto trainable = [&](const typename ParamBank<T>::Entry& e) {
    if (detail::has_prefix(e.name, "mofnet")) return mof_on;
    if (detail::has_prefix(e.name, codec_prefix)) return codec_on;
    return false;  // the unused coder variant never updates
  };

  Tape<T> t;
  auto bd = bind_params(t, model.bank, trainable);
  int ref = t.leaf(pair.reference.data);
  int cur = t.leaf(pair.current.data);
  Rng noise_rng(noise_seed);
  int alpha_override = -1;
  if (sched.phase_of(epoch0) == 1 && sched.mode != SystemMode::skip_only &&
      sched.mode != SystemMode::codecnet_only)
    alpha_override =
        t.leaf(phase1_alpha_mask<T>(pair.reference.height(), pair.reference.width()));
  auto nodes = forward_system(t, model, bd, ref, cur, sched.mode, QuantMode::train, noise_rng,
                              alpha_override);
  std::size_t pixels =
      static_cast<std::size_t>(pair.reference.height()) * pair.reference.width();
  auto ln = op_rd_loss(t, nodes.recon, cur, nodes.rate_m, nodes.rate_c, sched.lambda, pixels);
  t.backward(ln.loss);

  SampleOutcome<T> out;
  out.loss = static_cast<double>(t.val(ln.loss)[0]);
  out.bpp = static_cast<double>(t.val(ln.bpp)[0]);
  out.msssim = static_cast<double>(t.val(ln.ms_ssim)[0]);
  out.grads.resize(model.bank.entries.size());
  for (std::size_t i = 0; i < model.bank.entries.size(); ++i) {
    int id = bd(*model.bank.entries[i].tensor);
    if (t.needs_grad(id) && t.has_grad(id)) out.grads[i] = t.grad(id);
  }
  return out;
}

// Deterministic training loop. Data order, crops and quantization noise are
// all pure functions of (seed, epoch, step); per-epoch checkpoints land in
// <out_dir>/<lambda>/<epoch>.bin next to metrics.csv.
template <typename T>
TrainResult run_training(PFrameModel<T>& model, const TrainSchedule& sched_in,
                         const PairSource<T>& data, const std::string& out_dir,
                         const std::function<void(const EpochStats&)>& on_epoch = nullptr,
                         int worker_threads = 1) {
  TrainSchedule sched = sched_in.desk_scale ? sched_in.desk() : sched_in;
  sched.validate();
  if (data.size() == 0) throw contract_error("training: empty dataset");

  std::string lambda_dir;
  std::ofstream metrics;
  if (!out_dir.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", sched.lambda);
    lambda_dir = (std::filesystem::path(out_dir) / buf).string();
    std::filesystem::create_directories(lambda_dir);
    metrics.open(lambda_dir + "/metrics.csv");
    metrics << "epoch,phase,loss,bpp,ms_ssim\n";
  }

  Adam<T> opt(model.bank);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < sched.total_epochs(); ++epoch) {
    Rng order_rng(Rng::mix(sched.seed ^ 0xDA7A0001ULL, static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(order);
    Rng crop_rng(Rng::mix(sched.seed ^ 0xC407C407ULL, static_cast<std::uint64_t>(epoch)));

    bool mof_on = sched.mofnet_active(epoch);
    bool codec_on = sched.codec_active(epoch);
    const char* codec_prefix = detail::codec_prefix_for(sched.mode);
    auto active = [&](const typename ParamBank<T>::Entry& e) {
      if (detail::has_prefix(e.name, "mofnet")) return mof_on;
      if (detail::has_prefix(e.name, codec_prefix)) return codec_on;
      return false;
    };

    double sum_loss = 0, sum_bpp = 0, sum_ssim = 0;
    std::size_t samples = 0;
    double lr = sched.lr_at(epoch);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(sched.batch)) {
      std::size_t bsz = std::min<std::size_t>(static_cast<std::size_t>(sched.batch),
                                              order.size() - start);
      // crops drawn up front so the data is identical for any thread count
      std::vector<FramePairT<T>> batch;
      batch.reserve(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        FramePairT<T> pair = data.get(order[start + i]);
        if (pair.reference.height() > sched.crop || pair.reference.width() > sched.crop)
          pair = sample_crop_pair(pair, sched.crop, crop_rng);
        batch.push_back(std::move(pair));
      }
      std::vector<SampleOutcome<T>> outcomes(bsz);
      auto run_one = [&](std::size_t i) {
        std::uint64_t noise_seed = Rng::mix(sched.seed ^ 0x9015E000ULL,
                                            (static_cast<std::uint64_t>(epoch) << 32) ^
                                                (start + i));
        outcomes[i] = train_sample_pass(model, batch[i], sched, epoch, noise_seed);
      };
      if (worker_threads > 1 && bsz > 1) {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < worker_threads; ++w)
          pool.emplace_back([&] {
            for (;;) {
              std::size_t i = next.fetch_add(1);
              if (i >= bsz) return;
              run_one(i);
            }
          });
        for (auto& th : pool) th.join();
      } else {
        for (std::size_t i = 0; i < bsz; ++i) run_one(i);
      }

      // fixed-order reduction keeps results independent of threading
      std::vector<Tensor<T>> grads(model.bank.entries.size());
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto& oc = outcomes[i];
        if (!std::isfinite(oc.loss)) {
          if (!out_dir.empty()) {
            CheckpointMeta meta;
            meta.lambda = sched.lambda;
            meta.widths = model.widths;
            meta.codec_widths = model.codec_widths;
            meta.mode = to_string(sched.mode);
            meta.epoch = epoch + 1;
            meta.phase = sched.phase_of(epoch);
            meta.seed = sched.seed;
            save_checkpoint(lambda_dir + "/diagnostic.bin", model.bank, meta);
          }
          throw training_error("non-finite loss at epoch " + std::to_string(epoch + 1));
        }
        sum_loss += oc.loss;
        sum_bpp += oc.bpp;
        sum_ssim += oc.msssim;
        ++samples;
        for (std::size_t k = 0; k < grads.size(); ++k) {
          if (oc.grads[k].dims.empty()) continue;
          if (grads[k].dims.empty()) grads[k] = Tensor<T>(oc.grads[k].dims);
          T scale = static_cast<T>(1.0 / static_cast<double>(bsz));
          for (std::size_t v = 0; v < grads[k].size(); ++v)
            grads[k][v] += oc.grads[k][v] * scale;
        }
      }
      if (sched.grad_clip > 0) {
        double norm2 = 0;
        for (const auto& g : grads)
          for (const auto& v : g.data) norm2 += static_cast<double>(v) * v;
        double norm = std::sqrt(norm2);
        if (norm > sched.grad_clip) {
          T s = static_cast<T>(sched.grad_clip / norm);
          for (auto& g : grads)
            for (auto& v : g.data) v *= s;
        }
      }
      opt.step(grads, lr, active);
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.phase = sched.phase_of(epoch);
    st.loss = sum_loss / static_cast<double>(samples);
    st.bpp = sum_bpp / static_cast<double>(samples);
    st.ms_ssim = sum_ssim / static_cast<double>(samples);
    st.lr = lr;
    result.history.push_back(st);
    if (metrics.is_open()) {
      metrics << st.epoch << ',' << st.phase << ',' << st.loss << ',' << st.bpp << ','
              << st.ms_ssim << '\n';
      metrics.flush();
    }
    if (!out_dir.empty()) {
      CheckpointMeta meta;
      meta.lambda = sched.lambda;
      meta.widths = model.widths;
      meta.codec_widths = model.codec_widths;
      meta.mode = to_string(sched.mode);
      meta.epoch = epoch + 1;
      meta.phase = st.phase;
      meta.seed = sched.seed;
      std::string path = lambda_dir + "/" + std::to_string(epoch + 1) + ".bin";
      save_checkpoint(path, model.bank, meta);
      result.checkpoints.push_back(path);
    }
    if (on_epoch) on_epoch(st);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation helpers
// ---------------------------------------------------------------------------

// Mean over pairs of the eval-mode RD loss.
template <typename T>
double validation_loss(const PFrameModel<T>& model, const PairSource<T>& data, SystemMode mode,
                       double lambda) {
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    FramePairT<T> pair = data.get(i);
    Tape<T> t;
    auto bd = bind_params_frozen(t, model.bank);
    Rng rng(0);
    int ref = t.leaf(pair.reference.data), cur = t.leaf(pair.current.data);
    auto nodes = forward_system(t, model, bd, ref, cur, mode, QuantMode::eval, rng);
    std::size_t pixels =
        static_cast<std::size_t>(pair.reference.height()) * pair.reference.width();
    total += rd_loss(t.val(nodes.recon), pair.current.data,
                     static_cast<double>(t.val(nodes.rate_m)[0]),
                     static_cast<double>(t.val(nodes.rate_c)[0]), lambda, pixels);
  }
  return total / static_cast<double>(data.size());
}

// Mean flow endpoint error against the dataset's ground-truth translations.
template <typename T>
double mean_flow_epe(const PFrameModel<T>& model, const PairSource<T>& data) {
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    T tx, ty;
    if (!data.true_translation(i, tx, ty)) continue;
    FramePairT<T> pair = data.get(i);
    Tape<T> t;
    auto bd = bind_params_frozen(t, model.bank);
    Rng rng(0);
    int ref = t.leaf(pair.reference.data), cur = t.leaf(pair.current.data);
    auto nodes = forward_system(t, model, bd, ref, cur, SystemMode::full, QuantMode::eval, rng);
    const Tensor<T>& flow = t.val(nodes.flow);
    std::size_t plane = static_cast<std::size_t>(flow.dim(1)) * flow.dim(2);
    double sum = 0;
    for (std::size_t p = 0; p < plane; ++p) {
      double du = static_cast<double>(flow[p]) - static_cast<double>(tx);
      double dv = static_cast<double>(flow[plane + p]) - static_cast<double>(ty);
      sum += std::sqrt(du * du + dv * dv);
    }
    total += sum / static_cast<double>(plane);
    ++counted;
  }
  if (counted == 0) throw contract_error("epe: dataset has no ground-truth translations");
  return total / static_cast<double>(counted);
}

}  // namespace mofc
