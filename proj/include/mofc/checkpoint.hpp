// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mofc/layers.hpp"
#include "mofc/mofnet.hpp"

namespace mofc {

// Checkpoint container: "MOFW" | u32 version | u32 meta length | meta JSON |
// u32 param count | per param (u16 name length, name, u8 rank, u32 dims...,
// float32 data). Binary integers and floats are little-endian. Parameters are
// stored as float32 regardless of the working scalar type.
struct CheckpointMeta {
  double lambda = 0.01;
  Widths widths;        // MOFNet
  Widths codec_widths;  // CodecNet / residual coder
  std::string mode = "full";
  int epoch = 0;
  int phase = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"lambda", lambda},
            {"widths", {{"f", widths.f}, {"n", widths.n}, {"m", widths.m}}},
            {"codec_widths",
             {{"f", codec_widths.f}, {"n", codec_widths.n}, {"m", codec_widths.m}}},
            {"mode", mode},
            {"epoch", epoch},
            {"phase", phase},
            {"seed", seed}};
  }

  static CheckpointMeta from_json(const nlohmann::json& j) {
    CheckpointMeta m;
    m.lambda = j.at("lambda").get<double>();
    m.widths.f = j.at("widths").at("f").get<int>();
    m.widths.n = j.at("widths").at("n").get<int>();
    m.widths.m = j.at("widths").at("m").get<int>();
    if (j.contains("codec_widths")) {
      m.codec_widths.f = j.at("codec_widths").at("f").get<int>();
      m.codec_widths.n = j.at("codec_widths").at("n").get<int>();
      m.codec_widths.m = j.at("codec_widths").at("m").get<int>();
    } else {
      m.codec_widths = m.widths;
    }
    m.mode = j.at("mode").get<std::string>();
    m.epoch = j.at("epoch").get<int>();
    m.phase = j.at("phase").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  }
};

namespace detail {

inline void put_u32le(std::ostream& f, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32le(std::istream& f) {
  std::uint8_t b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamBank<T>& bank,
                     const CheckpointMeta& meta) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + tmp);
    f.write("MOFW", 4);
    detail::put_u32le(f, 1);
    std::string mj = meta.to_json().dump();
    detail::put_u32le(f, static_cast<std::uint32_t>(mj.size()));
    f.write(mj.data(), static_cast<std::streamsize>(mj.size()));
    detail::put_u32le(f, static_cast<std::uint32_t>(bank.entries.size()));
    for (const auto& e : bank.entries) {
      std::uint16_t nl = static_cast<std::uint16_t>(e.name.size());
      std::uint8_t b2[2] = {static_cast<std::uint8_t>(nl), static_cast<std::uint8_t>(nl >> 8)};
      f.write(reinterpret_cast<const char*>(b2), 2);
      f.write(e.name.data(), nl);
      std::uint8_t rank = static_cast<std::uint8_t>(e.tensor->rank());
      f.write(reinterpret_cast<const char*>(&rank), 1);
      for (int d = 0; d < e.tensor->rank(); ++d)
        detail::put_u32le(f, static_cast<std::uint32_t>(e.tensor->dim(d)));
      for (const T& v : e.tensor->data) {
        float fv = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &fv, 4);
        detail::put_u32le(f, bits);
      }
    }
    if (!f) throw io_error("short write: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Read only the metadata block; used to size a model before loading weights.
inline CheckpointMeta peek_checkpoint_meta(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MOFW", 4) != 0)
    throw format_error("not a checkpoint file: " + path);
  if (detail::get_u32le(f) != 1) throw format_error("unsupported checkpoint version");
  std::uint32_t mlen = detail::get_u32le(f);
  std::string mj(mlen, '\0');
  f.read(mj.data(), mlen);
  if (!f) throw format_error("checkpoint truncated: " + path);
  return CheckpointMeta::from_json(nlohmann::json::parse(mj));
}

template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, ParamBank<T>& bank) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MOFW", 4) != 0)
    throw format_error("not a checkpoint file: " + path);
  if (detail::get_u32le(f) != 1) throw format_error("unsupported checkpoint version");
  std::uint32_t mlen = detail::get_u32le(f);
  std::string mj(mlen, '\0');
  f.read(mj.data(), mlen);
  CheckpointMeta meta = CheckpointMeta::from_json(nlohmann::json::parse(mj));
  std::uint32_t count = detail::get_u32le(f);
  if (count != bank.entries.size())
    throw contract_error("checkpoint/config mismatch: parameter count differs");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint8_t b2[2];
    f.read(reinterpret_cast<char*>(b2), 2);
    std::uint16_t nl = static_cast<std::uint16_t>(b2[0] | (b2[1] << 8));
    std::string name(nl, '\0');
    f.read(name.data(), nl);
    auto& e = bank.entries[i];
    if (name != e.name)
      throw contract_error("checkpoint/config mismatch: expected parameter " + e.name +
                           ", found " + name);
    std::uint8_t rank;
    f.read(reinterpret_cast<char*>(&rank), 1);
    if (rank != e.tensor->rank())
      throw contract_error("checkpoint/config mismatch: rank differs for " + name);
    for (int d = 0; d < rank; ++d)
      if (detail::get_u32le(f) != static_cast<std::uint32_t>(e.tensor->dim(d)))
        throw contract_error("checkpoint/config mismatch: shape differs for " + name);
    for (T& v : e.tensor->data) {
      std::uint32_t bits = detail::get_u32le(f);
      float fv;
      std::memcpy(&fv, &bits, 4);
      v = static_cast<T>(fv);
    }
  }
  if (!f) throw format_error("checkpoint truncated: " + path);
  return meta;
}

}  // namespace mofc
