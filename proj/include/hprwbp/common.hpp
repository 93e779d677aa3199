// Copyright 2026 The hprwbp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hprwbp {

using Vector = std::vector<double>;

/// Thrown when inputs violate a documented precondition (shapes, weights).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterate stops being finite or a kernel under/overflows.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by file readers/writers; the message always carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flop accounting policies. Kernels take a counter by reference and report
// the arithmetic they perform; NoFlops compiles away.
struct NoFlops {
  static constexpr bool enabled = false;
  constexpr void add(std::size_t) noexcept {}
};

struct FlopCounter {
  static constexpr bool enabled = true;
  std::uint64_t count = 0;
  void add(std::size_t n) noexcept { count += n; }
  void reset() noexcept { count = 0; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sum(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v;
  return acc;
}

inline double norm_inf(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc = std::max(acc, std::abs(v));
  return acc;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// Number of worker threads for block-parallel kernels, read from
/// HPRWBP_NUM_THREADS (default 1).
inline unsigned kernel_threads() {
  const char* env = std::getenv("HPRWBP_NUM_THREADS");
  if (env == nullptr) return 1u;
  const long v = std::strtol(env, nullptr, 10);
  return v > 1 ? static_cast<unsigned>(v) : 1u;
}

/// Runs fn(t) for t in [0, count). Blocks are split into contiguous chunks;
/// each fn(t) must only write memory owned by block t, so the result does
/// not depend on the thread count.
template <class Fn>
void for_each_block(std::size_t count, Fn&& fn, unsigned threads = kernel_threads()) {
  if (threads <= 1 || count < 2) {
    for (std::size_t t = 0; t < count; ++t) fn(t);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = count * w / workers;
    const std::size_t hi = count * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t t = lo; t < hi; ++t) fn(t);
    });
  }
}

}  // namespace hprwbp
