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

#include "dgrl/graph.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <utility>

#include "dgrl/error.hpp"

namespace dgrl {

DirectedGraph build_graph(std::size_t num_nodes, std::vector<Edge> edges, RealMatrix node_features,
                          std::optional<RealMatrix> edge_features, Targets targets, GraphOptions options) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      fail(ErrorCode::kIndexOutOfRange, "edge " + std::to_string(k) + " (" + std::to_string(e.src) + "," +
                                            std::to_string(e.dst) + ") with num_nodes=" +
                                            std::to_string(num_nodes));
    }
    if (e.src == e.dst && !options.allow_self_loops) {
      fail(ErrorCode::kSelfLoop, "edge " + std::to_string(k) + " is a self-loop on node " + std::to_string(e.src));
    }
    if (!seen.emplace(e.src, e.dst).second) {
      fail(ErrorCode::kDuplicateEdge, "edge " + std::to_string(k) + " (" + std::to_string(e.src) + "," +
                                          std::to_string(e.dst) + ") appears twice");
    }
  }
  if (node_features.rows != num_nodes || node_features.data.size() != node_features.rows * node_features.cols) {
    fail(ErrorCode::kShapeMismatch, "node_features has " + std::to_string(node_features.rows) +
                                        " rows, expected " + std::to_string(num_nodes));
  }
  if (edge_features) {
    if (edge_features->rows != edges.size() ||
        edge_features->data.size() != edge_features->rows * edge_features->cols) {
      fail(ErrorCode::kShapeMismatch, "edge_features has " + std::to_string(edge_features->rows) +
                                          " rows, expected " + std::to_string(edges.size()));
    }
  }
  if (targets.node && targets.graph) {
    fail(ErrorCode::kConflictingTargets, "both node and graph targets supplied");
  }
  if (targets.node && targets.node->rows != num_nodes) {
    fail(ErrorCode::kShapeMismatch, "node targets have " + std::to_string(targets.node->rows) +
                                        " rows, expected " + std::to_string(num_nodes));
  }

  DirectedGraph g;
  g.num_nodes_ = num_nodes;
  g.edges_ = std::move(edges);
  g.node_features_ = std::move(node_features);
  g.edge_features_ = std::move(edge_features);
  g.targets_ = std::move(targets);
  g.allow_self_loops_ = options.allow_self_loops;
  return g;
}

std::vector<double> degree_total(const DirectedGraph& g) {
  std::vector<double> deg(g.num_nodes(), 0.0);
  for (const Edge& e : g.edges()) {
    deg[e.src] += 1.0;
    deg[e.dst] += 1.0;
  }
  return deg;
}

DirectedGraph reverse_edges(const DirectedGraph& g) {
  std::vector<Edge> flipped;
  flipped.reserve(g.num_edges());
  for (const Edge& e : g.edges()) flipped.push_back({e.dst, e.src});
  return build_graph(g.num_nodes(), std::move(flipped), g.node_features(), g.edge_features(), g.targets(),
                     {g.allows_self_loops()});
}

namespace {

// Kahn order; shorter than num_nodes when a cycle exists.
std::vector<std::size_t> topological_order(const DirectedGraph& g) {
  std::vector<std::vector<std::size_t>> out(g.num_nodes());
  std::vector<std::size_t> indeg(g.num_nodes(), 0);
  for (const Edge& e : g.edges()) {
    out[e.src].push_back(e.dst);
    ++indeg[e.dst];
  }
  std::vector<std::size_t> order;
  order.reserve(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (indeg[v] == 0) order.push_back(v);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (std::size_t w : out[order[head]]) {
      if (--indeg[w] == 0) order.push_back(w);
    }
  }
  return order;
}

}  // namespace

bool is_acyclic(const DirectedGraph& g) { return topological_order(g).size() == g.num_nodes(); }

double longest_path_length(const DirectedGraph& g) {
  const auto order = topological_order(g);
  if (order.size() != g.num_nodes()) fail(ErrorCode::kInvalidSpec, "longest path requires an acyclic graph");
  std::vector<std::vector<std::size_t>> out(g.num_nodes());
  for (const Edge& e : g.edges()) out[e.src].push_back(e.dst);
  std::vector<std::size_t> dist(g.num_nodes(), 0);
  std::size_t best = 0;
  for (std::size_t v : order) {
    for (std::size_t w : out[v]) dist[w] = std::max(dist[w], dist[v] + 1);
    best = std::max(best, dist[v]);
  }
  return static_cast<double>(best);
}

MetricDirection metric_direction(std::string_view metric) {
  if (metric == "mse" || metric == "rmse") return MetricDirection::kLowerBetter;
  if (metric == "r2" || metric == "accuracy" || metric == "precision" || metric == "recall" || metric == "f1" ||
      metric == "acc5" || metric == "acc10") {
    return MetricDirection::kHigherBetter;
  }
  fail(ErrorCode::kInvalidSpec, "unknown metric '" + std::string(metric) + "'");
}

TaskSpec make_task(TaskLevel level, Objective objective, std::size_t dim, std::vector<std::string> metrics) {
  if (dim == 0) fail(ErrorCode::kInvalidSpec, "task output dimension must be positive");
  if (objective == Objective::kClassification && dim < 2) {
    fail(ErrorCode::kInvalidSpec, "classification needs at least 2 classes");
  }
  if (metrics.empty()) {
    if (objective == Objective::kRegression) {
      metrics = {"mse", "rmse", "r2"};
    } else {
      metrics = {"accuracy", "precision", "recall", "f1"};
    }
  }
  for (const auto& m : metrics) {
    metric_direction(m);
    const bool regression_metric = m == "mse" || m == "rmse" || m == "r2" || m == "acc5" || m == "acc10";
    if (regression_metric != (objective == Objective::kRegression)) {
      fail(ErrorCode::kInvalidSpec, "metric '" + m + "' does not apply to this objective");
    }
  }
  return TaskSpec{level, objective, dim, std::move(metrics)};
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTestId: return "test_id";
    case Split::kTestOod: return "test_ood";
    case Split::kMasked: return "masked";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTestId, Split::kTestOod, Split::kMasked}) {
    if (split_name(s) == name) return s;
  }
  return std::nullopt;
}

void validate_dataset(const Dataset& d) {
  if (d.splits.size() != d.graphs.size()) {
    fail(ErrorCode::kSplitError, "split tags cover " + std::to_string(d.splits.size()) + " of " +
                                     std::to_string(d.graphs.size()) + " graphs");
  }
  if (d.node_splits.size() != d.graphs.size()) {
    fail(ErrorCode::kSplitError, "node split table does not cover every graph");
  }
  bool has_train = false;
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    const auto& g = d.graphs[i];
    const bool node_task = d.task.level == TaskLevel::kNode;
    if (node_task && !g.targets().node) {
      fail(ErrorCode::kSchemaError, "graph " + std::to_string(i) + " lacks node targets for a node-level task");
    }
    if (!node_task && !g.targets().graph) {
      fail(ErrorCode::kSchemaError, "graph " + std::to_string(i) + " lacks a graph target for a graph-level task");
    }
    if (d.splits[i] == Split::kMasked) {
      if (!node_task) fail(ErrorCode::kSplitError, "node masks are only valid for node-level tasks");
      if (d.node_splits[i].size() != g.num_nodes()) {
        fail(ErrorCode::kSplitError, "graph " + std::to_string(i) + " node mask does not cover every node");
      }
      for (Split s : d.node_splits[i]) {
        if (s == Split::kMasked) fail(ErrorCode::kSplitError, "node tag cannot be 'masked'");
        has_train = has_train || s == Split::kTrain;
      }
    } else {
      if (!d.node_splits[i].empty()) {
        fail(ErrorCode::kSplitError, "graph " + std::to_string(i) + " has both a graph tag and node tags");
      }
      has_train = has_train || d.splits[i] == Split::kTrain;
    }
  }
  if (!has_train) fail(ErrorCode::kSplitError, "train split is empty");
}

std::size_t max_num_nodes(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& g : d.graphs) n = std::max(n, g.num_nodes());
  return n;
}

}  // namespace dgrl
