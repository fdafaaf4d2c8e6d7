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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgrl/matrix.hpp"

namespace dgrl {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;

  bool operator==(const Edge&) const = default;
};

/// Supervision attached to a graph. At most one of the two may be set.
/// Classification targets hold the class index as a float64 in a single column.
struct Targets {
  std::optional<RealMatrix> node;
  std::optional<std::vector<double>> graph;

  bool operator==(const Targets&) const = default;
};

struct GraphOptions {
  bool allow_self_loops = false;
};

/// Immutable directed graph with node/edge features and targets.
///
/// Edges keep their insertion order; edge feature row k belongs to edge k.
/// Parallel duplicate edges are rejected, reciprocal pairs are legal.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const RealMatrix& node_features() const { return node_features_; }
  const std::optional<RealMatrix>& edge_features() const { return edge_features_; }
  const Targets& targets() const { return targets_; }
  bool allows_self_loops() const { return allow_self_loops_; }

  bool operator==(const DirectedGraph&) const = default;

 private:
  friend DirectedGraph build_graph(std::size_t, std::vector<Edge>, RealMatrix, std::optional<RealMatrix>,
                                   Targets, GraphOptions);

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  RealMatrix node_features_;
  std::optional<RealMatrix> edge_features_;
  Targets targets_;
  bool allow_self_loops_ = false;
};

/// Validates and assembles a graph. Throws IndexOutOfRange, ShapeMismatch,
/// ConflictingTargets, DuplicateEdge or SelfLoop.
DirectedGraph build_graph(std::size_t num_nodes, std::vector<Edge> edges, RealMatrix node_features,
                          std::optional<RealMatrix> edge_features = std::nullopt, Targets targets = {},
                          GraphOptions options = {});

/// In-degree plus out-degree per node.
std::vector<double> degree_total(const DirectedGraph& g);

/// Flips every edge; edge feature rows stay attached to their edge.
DirectedGraph reverse_edges(const DirectedGraph& g);

bool is_acyclic(const DirectedGraph& g);

/// Number of edges on the longest directed path. Requires a DAG.
double longest_path_length(const DirectedGraph& g);

enum class TaskLevel { kNode, kGraph };
enum class Objective { kRegression, kClassification };
enum class MetricDirection { kLowerBetter, kHigherBetter };

MetricDirection metric_direction(std::string_view metric);

struct TaskSpec {
  TaskLevel level = TaskLevel::kGraph;
  Objective objective = Objective::kRegression;
  /// Regression output width, or number of classes for classification.
  std::size_t dim = 1;
  std::vector<std::string> metrics;

  std::size_t output_dim() const { return dim; }
  const std::string& primary_metric() const { return metrics.front(); }

  bool operator==(const TaskSpec&) const = default;
};

/// Fills metrics with the conventional set for the objective when empty and
/// checks every metric name. Throws InvalidSpec.
TaskSpec make_task(TaskLevel level, Objective objective, std::size_t dim,
                   std::vector<std::string> metrics = {});

enum class Split { kTrain, kVal, kTestId, kTestOod, kMasked };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct Dataset {
  std::vector<DirectedGraph> graphs;
  TaskSpec task;
  /// One tag per graph. kMasked marks a graph whose nodes carry their own tags.
  std::vector<Split> splits;
  /// Per-node tags; empty for graphs tagged at graph level.
  std::vector<std::vector<Split>> node_splits;

  bool operator==(const Dataset&) const = default;
};

/// Checks split coverage and target consistency. Throws SplitError/SchemaError.
void validate_dataset(const Dataset& d);

std::size_t max_num_nodes(const Dataset& d);

}  // namespace dgrl
