// Copyright (c) 2026 the mofc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mofc {

// Error taxonomy. Library code throws these; the CLI maps them to exit codes.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : error {
  using error::error;
};
struct format_error : error {
  using error::error;
};
struct dimension_error : error {
  using error::error;
};
struct contract_error : error {
  using error::error;
};
struct decode_error : error {
  using error::error;
};
struct training_error : error {
  using error::error;
};

inline constexpr int kVersionMajor = 0;
inline constexpr int kVersionMinor = 1;

// Rounding convention used everywhere integers are produced from reals:
// half away from zero.
template <typename T>
inline std::int32_t round_half_away(T v) {
  return static_cast<std::int32_t>(v >= T(0) ? v + T(0.5) : v - T(0.5));
}

template <typename T>
inline T clamp_val(T v, T lo, T hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace mofc
