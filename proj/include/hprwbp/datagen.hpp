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

// Instance generation: Gaussian-mixture samples, k-means barycenter supports,
// squared Euclidean costs, and grayscale images as distributions.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "hprwbp/problem.hpp"

namespace hprwbp {

/// Seeded stream with explicit transforms so the draws do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    return r * std::cos(th);
  }

  /// Index in [0, n).
  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Index drawn proportionally to nonnegative weights with positive total.
  std::size_t weighted(std::span<const double> w, double total) {
    double target = uniform() * total, acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (target < acc) return i;
    }
    for (std::size_t i = w.size(); i-- > 0;)
      if (w[i] > 0.0) return i;
    return w.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

/// n uniform(0,1) draws normalized to sum 1.
inline Vector random_simplex_point(Rng& rng, std::size_t n) {
  Vector w(n);
  for (double& v : w) v = rng.uniform();
  const double s = sum(w);
  for (double& v : w) v /= s;
  return w;
}

struct GaussianMixture1d {
  Vector means{-20.0, -10.0, 0.0, 10.0, 20.0};
  double variance = 5.0;
};

struct SyntheticConfig {
  std::size_t T = 10;
  std::size_t m = 20;
  std::vector<std::size_t> mt;  // per-sample atom counts; empty means m_default for all
  std::size_t mt_default = 20;
  std::size_t d = 3;
  std::uint64_t seed = 1;
  GaussianMixture1d mixture;
  std::size_t kmeans_sweeps = 100;

  std::size_t atoms(std::size_t t) const { return mt.empty() ? mt_default : mt[t]; }

  void validate() const {
    if (T < 1) throw InvalidArgument("T must be >= 1");
    if (m < 2) throw InvalidArgument("m must be >= 2");
    if (d < 1) throw InvalidArgument("d must be >= 1");
    if (!mt.empty() && mt.size() != T) throw InvalidArgument("mt must list one count per sample");
    std::size_t pooled = 0;
    for (std::size_t t = 0; t < T; ++t) {
      if (atoms(t) < 1) throw InvalidArgument("every m_t must be >= 1");
      pooled += atoms(t);
    }
    if (pooled < m) throw InvalidArgument("need at least m pooled support points for k-means");
    if (mixture.means.empty() || !(mixture.variance > 0.0)) throw InvalidArgument("invalid mixture parameters");
  }
};

inline double squared_distance(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] - q[k];
    s += d * d;
  }
  return s;
}

/// D(i, j) = ||p_i - q_j||^2, unnormalized.
inline DenseMatrix squared_distance_matrix(const PointSet& P, const PointSet& Q) {
  if (P.dim != Q.dim) throw InvalidArgument("support dimensions differ");
  DenseMatrix D(P.size(), Q.size());
  for (std::size_t j = 0; j < Q.size(); ++j)
    for (std::size_t i = 0; i < P.size(); ++i) D.data[j * D.rows + i] = squared_distance(P.point(i), Q.point(j));
  return D;
}

/// Squared Euclidean costs between the barycenter supports and each sample,
/// jointly scaled so the largest entry over all matrices is 1. All-zero costs
/// stay zero.
inline std::vector<DenseMatrix> build_cost(const PointSet& barycenter, const std::vector<PointSet>& samples) {
  std::vector<DenseMatrix> D(samples.size());
  for_each_block(samples.size(), [&](std::size_t t) { D[t] = squared_distance_matrix(barycenter, samples[t]); },
                 kernel_threads());
  double mx = 0.0;
  for (const auto& Dt : D)
    for (double v : Dt.data) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite support coordinate");
      mx = std::max(mx, v);
    }
  if (mx > 0.0)
    for (auto& Dt : D)
      for (double& v : Dt.data) v /= mx;
  return D;
}

inline std::vector<DenseMatrix> build_cost(const PointSet& barycenter, const std::vector<DiscreteDistribution>& samples) {
  std::vector<PointSet> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(s.supports);
  return build_cost(barycenter, pts);
}

struct KMeansResult {
  PointSet centers;
  std::vector<double> wcss;  // after each sweep
  std::size_t sweeps = 0;
  std::size_t reseeds = 0;
};

inline double wcss(const PointSet& pts, const PointSet& centers, std::vector<std::size_t>* assign = nullptr) {
  double total = 0.0;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = squared_distance(pts.point(p), centers.point(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    if (assign != nullptr) (*assign)[p] = arg;
    total += best;
  }
  return total;
}

/// k-means++ seeding followed by Lloyd sweeps until the largest center
/// movement is below `tol` or `max_sweeps` is reached. Empty clusters are
/// re-seeded from a random point.
inline KMeansResult kmeans_select(const PointSet& pts, std::size_t k, std::uint64_t seed,
                                  std::size_t max_sweeps = 100, double tol = 1e-9) {
  if (k < 1 || pts.size() < k) throw InvalidArgument("k-means needs 1 <= k <= number of points");
  const std::size_t d = pts.dim, n = pts.size();
  Rng rng(seed);
  KMeansResult res;
  res.centers = PointSet(d, k);
  auto set_center = [&](std::size_t c, std::size_t p) {
    std::copy_n(pts.coords.begin() + static_cast<std::ptrdiff_t>(p * d), d,
                res.centers.coords.begin() + static_cast<std::ptrdiff_t>(c * d));
  };
  set_center(0, rng.index(n));
  Vector dist(n);
  for (std::size_t p = 0; p < n; ++p) dist[p] = squared_distance(pts.point(p), res.centers.point(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = sum(dist);
    const std::size_t pick = total > 0.0 ? rng.weighted(dist, total) : rng.index(n);
    set_center(c, pick);
    for (std::size_t p = 0; p < n; ++p) dist[p] = std::min(dist[p], squared_distance(pts.point(p), res.centers.point(c)));
  }

  std::vector<std::size_t> assign(n);
  std::vector<std::size_t> count(k);
  Vector acc(k * d);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    wcss(pts, res.centers, &assign);
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++count[assign[p]];
      for (std::size_t q = 0; q < d; ++q) acc[assign[p] * d + q] += pts.coords[p * d + q];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        set_center(c, rng.index(n));
        ++res.reseeds;
        moved = std::numeric_limits<double>::infinity();
        continue;
      }
      double shift = 0.0;
      for (std::size_t q = 0; q < d; ++q) {
        const double nv = acc[c * d + q] / static_cast<double>(count[c]);
        const double dv = nv - res.centers.coords[c * d + q];
        shift += dv * dv;
        res.centers.coords[c * d + q] = nv;
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    res.sweeps = sweep + 1;
    res.wcss.push_back(wcss(pts, res.centers));
    if (moved < tol) break;
  }
  return res;
}

/// One point from the mixture: every coordinate independently picks a
/// component and draws from it.
inline void draw_mixture_point(Rng& rng, const GaussianMixture1d& gm, std::span<const double> proportions,
                               std::span<double> out) {
  const double sd = std::sqrt(gm.variance);
  for (double& v : out) {
    const std::size_t c = rng.weighted(proportions, 1.0);
    v = gm.means[c] + sd * rng.normal();
  }
}

struct SyntheticInstance {
  WbpInstance instance;
  SyntheticConfig config;
  Vector mixture_proportions;
};

inline SyntheticInstance generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Vector proportions = random_simplex_point(rng, cfg.mixture.means.size());
  std::vector<DiscreteDistribution> samples(cfg.T);
  std::size_t pooled_n = 0;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const std::size_t n = cfg.atoms(t);
    PointSet pts(cfg.d, n);
    for (std::size_t i = 0; i < n; ++i)
      draw_mixture_point(rng, cfg.mixture, proportions,
                         std::span<double>(pts.coords.data() + i * cfg.d, cfg.d));
    samples[t].supports = std::move(pts);
    samples[t].weights = random_simplex_point(rng, n);
    pooled_n += n;
  }
  const Vector omega = random_simplex_point(rng, cfg.T);
  PointSet pooled(cfg.d, pooled_n);
  std::size_t at = 0;
  for (const auto& s : samples) {
    std::copy(s.supports.coords.begin(), s.supports.coords.end(), pooled.coords.begin() + static_cast<std::ptrdiff_t>(at));
    at += s.supports.coords.size();
  }
  // Separate stream for k-means so the sample draws do not depend on it.
  const KMeansResult km = kmeans_select(pooled, cfg.m, cfg.seed ^ 0x9e3779b97f4a7c15ULL, cfg.kmeans_sweeps);
  auto costs = build_cost(km.centers, samples);
  WbpInstance inst(std::move(samples), km.centers, omega, std::move(costs));
  return {std::move(inst), cfg, proportions};
}

struct GrayImage {
  std::size_t rows = 0, cols = 0;
  unsigned maxval = 255;
  Vector pixels;  // row-major

  double operator()(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
};

namespace detail {

inline std::string next_pgm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) return tok;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace detail

/// Reads binary (P5) or ASCII (P2) PGM. 16-bit P5 samples are big-endian.
inline GrayImage read_pgm(std::istream& in, const std::string& name = "<stream>") {
  auto fail = [&](const std::string& why) { return IoError(name + ": " + why); };
  const std::string magic = detail::next_pgm_token(in);
  if (magic != "P2" && magic != "P5") throw fail("not a PGM file (magic '" + magic + "')");
  GrayImage img;
  try {
    img.cols = std::stoul(detail::next_pgm_token(in));
    img.rows = std::stoul(detail::next_pgm_token(in));
    img.maxval = static_cast<unsigned>(std::stoul(detail::next_pgm_token(in)));
  } catch (const std::exception&) {
    throw fail("malformed PGM header");
  }
  if (img.rows == 0 || img.cols == 0 || img.maxval == 0 || img.maxval > 65535) throw fail("invalid PGM dimensions");
  const std::size_t n = img.rows * img.cols;
  img.pixels.resize(n);
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = detail::next_pgm_token(in);
      if (tok.empty()) throw fail("truncated pixel data");
      img.pixels[i] = std::stod(tok);
    }
  } else {
    const std::size_t bytes = img.maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw fail("truncated pixel data");
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = bytes == 1 ? raw[i] : static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_pgm(in, path);
}

/// Writes values scaled to [0, maxval] as binary PGM.
inline void write_pgm(const std::string& path, std::size_t rows, std::size_t cols, std::span<const double> values) {
  if (values.size() != rows * cols) throw InvalidArgument("image size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  double mx = 0.0;
  for (double v : values) mx = std::max(mx, v);
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double v : values) {
    const double scaled = mx > 0.0 ? std::clamp(v / mx, 0.0, 1.0) * 255.0 : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  if (!out) throw IoError("failed writing " + path);
}

/// All pixels become atoms at (row, col); weights are intensities over total.
inline DiscreteDistribution image_to_distribution(const GrayImage& img) {
  double total = 0.0;
  for (double v : img.pixels) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("pixel intensities must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw InvalidArgument("image has no mass (all pixels zero)");
  DiscreteDistribution out;
  out.supports = PointSet(2, img.rows * img.cols);
  out.weights.resize(img.rows * img.cols);
  for (std::size_t r = 0; r < img.rows; ++r)
    for (std::size_t c = 0; c < img.cols; ++c) {
      const std::size_t i = r * img.cols + c;
      out.supports.coords[2 * i] = static_cast<double>(r);
      out.supports.coords[2 * i + 1] = static_cast<double>(c);
      out.weights[i] = img.pixels[i] / total;
    }
  return out;
}

/// Barycenter of same-sized images on the shared pixel grid.
inline WbpInstance image_instance(const std::vector<GrayImage>& images, Vector omega = {}) {
  if (images.empty()) throw InvalidArgument("need at least one image");
  std::vector<DiscreteDistribution> samples;
  for (const auto& img : images) {
    if (img.rows != images[0].rows || img.cols != images[0].cols) throw InvalidArgument("images differ in size");
    samples.push_back(image_to_distribution(img));
  }
  if (omega.empty()) omega.assign(images.size(), 1.0 / static_cast<double>(images.size()));
  PointSet grid = samples[0].supports;
  auto costs = build_cost(grid, samples);
  return WbpInstance(std::move(samples), std::move(grid), std::move(omega), std::move(costs));
}

}  // namespace hprwbp
