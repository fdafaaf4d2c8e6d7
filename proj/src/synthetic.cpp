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

#include "dgrl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "dgrl/error.hpp"

namespace dgrl {

std::string_view label_rule_name(LabelRule rule) {
  return rule == LabelRule::kLongestPath ? "longest-path-length" : "local-motif-count";
}

LabelRule parse_label_rule(std::string_view name) {
  if (name == "longest-path-length") return LabelRule::kLongestPath;
  if (name == "local-motif-count") return LabelRule::kLocalMotifCount;
  fail(ErrorCode::kInvalidSpec, "unknown label rule '" + std::string(name) + "'");
}

TaskSpec synthetic_task(const SyntheticSpec& spec) {
  if (spec.label_rule == LabelRule::kLongestPath) {
    return make_task(TaskLevel::kGraph, Objective::kRegression, 1, spec.metrics);
  }
  return make_task(TaskLevel::kNode, Objective::kClassification, spec.num_classes, spec.metrics);
}

std::vector<double> motif_labels(const DirectedGraph& g, std::size_t num_classes) {
  const std::size_t n = g.num_nodes();
  std::vector<std::set<std::size_t>> out(n);
  for (const Edge& e : g.edges()) out[e.src].insert(e.dst);
  std::vector<double> labels(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t count = 0;
    for (std::size_t a : out[v]) {
      for (std::size_t b : out[a]) {
        if (b != v && out[v].count(b) != 0) ++count;
      }
    }
    labels[v] = static_cast<double>(std::min(count, num_classes - 1));
  }
  return labels;
}

namespace {

void check_spec(const SyntheticSpec& spec) {
  if (spec.num_graphs == 0) fail(ErrorCode::kInvalidSpec, "num_graphs must be positive");
  if (spec.min_nodes < 2) fail(ErrorCode::kInvalidSpec, "node range minimum must be at least 2");
  if (spec.max_nodes < spec.min_nodes) fail(ErrorCode::kInvalidSpec, "node range is empty");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) fail(ErrorCode::kInvalidSpec, "density must lie in (0, 1]");
  if (spec.label_rule == LabelRule::kLongestPath && !spec.dag_only) {
    fail(ErrorCode::kInvalidSpec, "longest-path-length labels require dag_only graphs");
  }
  if (spec.label_rule == LabelRule::kLocalMotifCount && spec.num_classes < 2) {
    fail(ErrorCode::kInvalidSpec, "local-motif-count needs num_classes >= 2");
  }
  for (double f : {spec.val_fraction, spec.test_fraction, spec.ood_fraction}) {
    if (f < 0.0 || f >= 1.0) fail(ErrorCode::kInvalidSpec, "split fractions must lie in [0, 1)");
  }
}

DirectedGraph random_graph(const SyntheticSpec& spec, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  if (spec.dag_only) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (unit(rng) < spec.density) edges.push_back({order[i], order[j]});
      }
    }
    if (edges.empty()) edges.push_back({order[0], order[1]});
  } else {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        if (u != v && unit(rng) < spec.density) edges.push_back({u, v});
      }
    }
    if (edges.empty()) edges.push_back({0, 1});
  }

  RealMatrix x(n, 2);
  for (std::size_t v = 0; v < n; ++v) {
    x(v, 0) = 1.0;
    x(v, 1) = unit(rng);
  }
  auto g = build_graph(n, std::move(edges), std::move(x));
  Targets t;
  if (spec.label_rule == LabelRule::kLongestPath) {
    t.graph = std::vector<double>{longest_path_length(g)};
  } else {
    t.node = RealMatrix(n, 1, motif_labels(g, spec.num_classes));
  }
  return build_graph(n, g.edges(), g.node_features(), std::nullopt, std::move(t));
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  std::mt19937_64 rng(seed);

  const auto n_ood = static_cast<std::size_t>(std::llround(spec.ood_fraction * static_cast<double>(spec.num_graphs)));
  const std::size_t n_id = spec.num_graphs - std::min(n_ood, spec.num_graphs - 1);
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n_id)));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n_id)));
  if (n_val + n_test >= n_id) fail(ErrorCode::kInvalidSpec, "split fractions leave no training graphs");

  Dataset d;
  d.task = synthetic_task(spec);
  std::uniform_int_distribution<std::size_t> id_size(spec.min_nodes, spec.max_nodes);
  std::uniform_int_distribution<std::size_t> ood_size(spec.max_nodes + 1, 2 * spec.max_nodes);
  for (std::size_t i = 0; i < spec.num_graphs; ++i) {
    const bool ood = i >= n_id;
    const std::size_t n = ood ? ood_size(rng) : id_size(rng);
    d.graphs.push_back(random_graph(spec, n, rng));
    Split s = Split::kTrain;
    if (ood) {
      s = Split::kTestOod;
    } else if (i >= n_id - n_test) {
      s = Split::kTestId;
    } else if (i >= n_id - n_test - n_val) {
      s = Split::kVal;
    }
    d.splits.push_back(s);
  }
  d.node_splits.assign(d.graphs.size(), {});
  validate_dataset(d);
  return d;
}

}  // namespace dgrl
