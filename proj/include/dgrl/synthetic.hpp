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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dgrl/graph.hpp"

namespace dgrl {

enum class LabelRule {
  /// Graph regression on the number of edges of the longest directed path.
  kLongestPath,
  /// Node classification on the number of feed-forward loops v->a->b, v->b
  /// rooted at each node, capped at num_classes - 1.
  kLocalMotifCount,
};

std::string_view label_rule_name(LabelRule rule);
LabelRule parse_label_rule(std::string_view name);

struct SyntheticSpec {
  std::size_t num_graphs = 10;
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 8;
  double density = 0.3;
  bool dag_only = true;
  LabelRule label_rule = LabelRule::kLongestPath;
  std::size_t num_classes = 3;
  /// Overrides the rule's default metric list when non-empty.
  std::vector<std::string> metrics;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  /// Share of graphs drawn from the larger out-of-distribution size range
  /// [max_nodes + 1, 2 * max_nodes].
  double ood_fraction = 0.2;

  bool operator==(const SyntheticSpec&) const = default;
};

TaskSpec synthetic_task(const SyntheticSpec& spec);

/// Pure function of (spec, seed). Throws InvalidSpec.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

std::vector<double> motif_labels(const DirectedGraph& g, std::size_t num_classes);

}  // namespace dgrl
