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

#include <random>

#include "hprwbp/hprwbp.hpp"

namespace testing_helpers {

using hprwbp::DenseMatrix;
using hprwbp::DiscreteDistribution;
using hprwbp::PointSet;
using hprwbp::Vector;
using hprwbp::WbpInstance;

inline Vector simplex_point(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vector w(n);
  double s = 0.0;
  for (double& v : w) s += (v = u(g));
  for (double& v : w) v /= s;
  return w;
}

/// Cost-only instance with random nonnegative costs.
inline WbpInstance random_instance(std::mt19937_64& g, std::size_t m, const std::vector<std::size_t>& mt) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DiscreteDistribution> samples;
  std::vector<DenseMatrix> costs;
  for (auto n : mt) {
    DiscreteDistribution d;
    d.supports = PointSet(0, 0);
    d.supports.count = n;
    d.weights = simplex_point(g, n);
    samples.push_back(d);
    DenseMatrix C(m, n);
    for (double& v : C.data) v = u(g);
    costs.push_back(C);
  }
  PointSet bary(0, 0);
  bary.count = m;
  return WbpInstance(samples, bary, simplex_point(g, mt.size()), costs);
}

/// T = 1 with the sample supports reused as barycenter supports.
inline WbpInstance self_instance(std::mt19937_64& g, std::size_t m, std::size_t d = 2) {
  std::normal_distribution<double> n01;
  PointSet pts(d, m);
  for (double& v : pts.coords) v = n01(g);
  DiscreteDistribution s;
  s.supports = pts;
  s.weights = simplex_point(g, m);
  auto costs = hprwbp::build_cost(pts, std::vector<PointSet>{pts});
  return WbpInstance({s}, pts, {1.0}, costs);
}

inline std::vector<std::size_t> random_dims(std::mt19937_64& g, std::size_t T, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> u(lo, hi);
  std::vector<std::size_t> v(T);
  for (auto& e : v) e = u(g);
  return v;
}

}  // namespace testing_helpers
