// Copyright 2026 The DGRL Authors
//
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

// Shared fixtures for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "dgrl/graph.hpp"
#include "dgrl/matrix.hpp"

namespace dgrl::testing {

inline RealMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealMatrix m{rows, cols, std::vector<double>(rows * cols)};
  for (double& v : m.data) v = u(rng);
  return m;
}

inline RealMatrix zeros(std::size_t rows, std::size_t cols) {
  return RealMatrix{rows, cols, std::vector<double>(rows * cols, 0.0)};
}

struct RandomGraphOptions {
  double density = 0.3;
  bool reciprocal = true;  // allow both (u,v) and (v,u)
  std::size_t node_features = 3;
  std::size_t edge_features = 0;
  bool ensure_edge = true;
};

/// Random directed graph without self-loops or duplicate edges.
inline DirectedGraph random_graph(std::size_t n, std::mt19937_64& rng, const RandomGraphOptions& opt = {}) {
  std::bernoulli_distribution coin(opt.density);
  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || !coin(rng)) continue;
      if (!opt.reciprocal && seen.count({v, u})) continue;
      edges.push_back({u, v});
      seen.insert({u, v});
    }
  }
  if (opt.ensure_edge && edges.empty() && n >= 2) edges.push_back({0, 1});
  std::shuffle(edges.begin(), edges.end(), rng);
  std::optional<RealMatrix> ef;
  if (opt.edge_features > 0) ef = random_matrix(edges.size(), opt.edge_features, rng);
  return build_graph(n, std::move(edges), random_matrix(n, opt.node_features, rng), ef);
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Relabels node i as perm[i]; edge order and edge features are kept.
inline DirectedGraph permute_graph(const DirectedGraph& g, const std::vector<std::size_t>& perm) {
  const std::size_t n = g.num_nodes();
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) edges.push_back({perm[e.src], perm[e.dst]});
  const RealMatrix& x = g.node_features();
  RealMatrix px{n, x.cols, std::vector<double>(x.data.size())};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < x.cols; ++c) px(perm[i], c) = x(i, c);
  }
  Targets t = g.targets();
  if (t.node) {
    RealMatrix py{n, t.node->cols, std::vector<double>(t.node->data.size())};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < py.cols; ++c) py(perm[i], c) = (*t.node)(i, c);
    }
    t.node = py;
  }
  return build_graph(n, std::move(edges), std::move(px), g.edge_features(), std::move(t),
                     GraphOptions{g.allows_self_loops()});
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dgrl::testing
