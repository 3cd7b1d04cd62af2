// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mofc/ops_conv.hpp"
#include "mofc/ops_gdn.hpp"
#include "mofc/random.hpp"
#include "mofc/tape.hpp"

namespace mofc {

inline constexpr double kLeakySlope = 0.01;

enum class Nonlinearity { GDN, IGDN, LeakyReLU, none };

// Declarative description of one convolution stage, mirrored by the config
// file schema.
struct ConvSpec {
  int filters = 0;
  int kernel = 5;
  int stride = 2;
  bool transposed = false;
  bool masked = false;
  Nonlinearity nonlinearity = Nonlinearity::none;

  void validate() const {
    if (filters < 1) throw contract_error("conv spec: filters must be >= 1");
    if (kernel % 2 == 0) throw contract_error("conv spec: kernel must be odd");
    if (stride != 1 && stride != 2) throw contract_error("conv spec: stride must be 1 or 2");
  }
};

enum class ParamKind { weight, bias, gdn_beta, gdn_gamma, log_scale };

// Central registry of trainable tensors. Order is construction order and is
// the serialization order; names are stable identifiers.
template <typename T>
struct ParamBank {
  struct Entry {
    std::string name;
    Tensor<T>* tensor;
    ParamKind kind;
  };
  std::vector<Entry> entries;

  void add(std::string name, Tensor<T>& t, ParamKind kind) {
    entries.push_back({std::move(name), &t, kind});
  }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.tensor->size();
    return n;
  }

  // Standard init: fan-in scaled normal weights, zero biases, GDN beta 1 and
  // gamma 0.1*I, unit prior scales.
  void initialize(Rng& rng) {
    for (auto& e : entries) {
      Tensor<T>& t = *e.tensor;
      switch (e.kind) {
        case ParamKind::weight: {
          // fan-in scaled normal, sqrt(2) gain (keeps activation variance flat
          // through the LeakyReLU stacks, so latents start above the
          // quantization noise floor)
          std::size_t fan_in = 1;
          for (int d = 1; d < t.rank(); ++d) fan_in *= static_cast<std::size_t>(t.dim(d));
          T std = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
          for (auto& v : t.data) v = static_cast<T>(rng.normal()) * std;
          break;
        }
        case ParamKind::bias:
          t.fill(T(0));
          break;
        case ParamKind::gdn_beta:
          t.fill(T(1));
          break;
        case ParamKind::gdn_gamma: {
          t.fill(T(0));
          for (int i = 0; i < t.dim(0); ++i) t.at2(i, i) = T(0.1);
          break;
        }
        case ParamKind::log_scale:
          t.fill(T(0));  // scale exp(0) = 1
          break;
      }
    }
  }

  // Keep GDN parameters inside their domain after every optimizer step.
  void project() {
    for (auto& e : entries) {
      if (e.kind == ParamKind::gdn_beta)
        for (auto& v : e.tensor->data) v = std::max(v, static_cast<T>(kGdnBetaMin));
      else if (e.kind == ParamKind::gdn_gamma)
        for (auto& v : e.tensor->data) v = std::max(v, T(0));
    }
  }
};

// Per-forward mapping from parameter tensors to tape leaf ids.
template <typename T>
struct BoundParams {
  std::unordered_map<const Tensor<T>*, int> ids;

  int operator()(const Tensor<T>& p) const {
    auto it = ids.find(&p);
    if (it == ids.end()) throw contract_error("parameter not bound to tape");
    return it->second;
  }
};

// trainable(entry) decides whether this pass accumulates gradients for the
// entry (freezing = binding with requires_grad false).
template <typename T, typename Filter>
BoundParams<T> bind_params(Tape<T>& tape, const ParamBank<T>& bank, Filter&& trainable) {
  BoundParams<T> bound;
  for (const auto& e : bank.entries) bound.ids[e.tensor] = tape.leaf(*e.tensor, trainable(e));
  return bound;
}

template <typename T>
BoundParams<T> bind_params_frozen(Tape<T>& tape, const ParamBank<T>& bank) {
  return bind_params(tape, bank, [](const auto&) { return false; });
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct ConvLayer {
  Tensor<T> w;  // conv: (O,I,k,k); transposed: (I,O,k,k)
  Tensor<T> b;
  ConvSpec spec;
  int in_ch = 0;

  void build(int in_channels, const ConvSpec& s, ParamBank<T>& bank, const std::string& name) {
    s.validate();
    spec = s;
    in_ch = in_channels;
    w = spec.transposed ? Tensor<T>(shape4(in_channels, spec.filters, spec.kernel, spec.kernel))
                        : Tensor<T>(shape4(spec.filters, in_channels, spec.kernel, spec.kernel));
    b = Tensor<T>(shape1(spec.filters));
    bank.add(name + ".w", w, ParamKind::weight);
    bank.add(name + ".b", b, ParamKind::bias);
  }

  int forward(Tape<T>& t, const BoundParams<T>& bd, int x) const {
    int pad = spec.kernel / 2;
    int y;
    if (spec.masked) {
      y = op_masked_conv(t, x, bd(w), bd(b));
    } else if (spec.transposed) {
      int oh = t.val(x).dim(1) * spec.stride;
      int ow = t.val(x).dim(2) * spec.stride;
      y = op_tconv2d(t, x, bd(w), bd(b), spec.stride, pad, oh, ow);
    } else {
      y = op_conv2d(t, x, bd(w), bd(b), spec.stride, pad);
    }
    switch (spec.nonlinearity) {
      case Nonlinearity::LeakyReLU:
        return op_leaky_relu(t, y, static_cast<T>(kLeakySlope));
      case Nonlinearity::GDN:
      case Nonlinearity::IGDN:
        throw contract_error("conv layer: GDN handled by GdnLayer");
      case Nonlinearity::none:
        return y;
    }
    return y;
  }
};

template <typename T>
struct GdnLayer {
  Tensor<T> beta;
  Tensor<T> gamma;
  bool inverse = false;

  void build(int channels, bool inv, ParamBank<T>& bank, const std::string& name) {
    beta = Tensor<T>(shape1(channels));
    gamma = Tensor<T>(shape2(channels, channels));
    inverse = inv;
    bank.add(name + ".beta", beta, ParamKind::gdn_beta);
    bank.add(name + ".gamma", gamma, ParamKind::gdn_gamma);
  }

  int forward(Tape<T>& t, const BoundParams<T>& bd, int x) const {
    return op_gdn(t, x, bd(beta), bd(gamma), inverse);
  }
};

}  // namespace mofc
