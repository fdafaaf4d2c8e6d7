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


#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dgrl/dataset_io.hpp"
#include "dgrl/error.hpp"
#include "dgrl/graph.hpp"
#include "dgrl/synthetic.hpp"
#include "helpers.hpp"

using namespace dgrl;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected dgrl::Error");
  return ErrorCode::kIoError;
}

SyntheticSpec ten_graph_spec() {
  SyntheticSpec s;
  s.num_graphs = 10;
  s.min_nodes = 4;
  s.max_nodes = 8;
  s.density = 0.3;
  s.dag_only = true;
  s.label_rule = LabelRule::kLongestPath;
  return s;
}

}  // namespace

TEST_CASE("build_graph accepts minimal input and keeps edge order") {
  Targets t;
  t.graph = std::vector<double>{1.0};
  const auto g = build_graph(2, {{0, 1}}, RealMatrix(2, 1), std::nullopt, t);
  CHECK(g.num_nodes() == 2);
  CHECK(g.num_edges() == 1);

  std::vector<Edge> edges{{2, 0}, {0, 1}, {1, 2}};
  const auto h = build_graph(3, edges, RealMatrix(3, 1));
  CHECK(h.edges() == edges);
}

TEST_CASE("build_graph validation errors") {
  CHECK(code_of([] { build_graph(2, {{0, 2}}, RealMatrix(2, 1)); }) == ErrorCode::kIndexOutOfRange);
  CHECK(code_of([] { build_graph(2, {{1, 1}}, RealMatrix(2, 1)); }) == ErrorCode::kSelfLoop);
  CHECK(code_of([] { build_graph(2, {{0, 1}, {0, 1}}, RealMatrix(2, 1)); }) == ErrorCode::kDuplicateEdge);
  CHECK(code_of([] { build_graph(3, {{0, 1}}, RealMatrix(2, 1)); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([] { build_graph(2, {{0, 1}}, RealMatrix(2, 1), RealMatrix(2, 1)); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([] {
          Targets t;
          t.graph = std::vector<double>{1.0};
          t.node = RealMatrix(2, 1);
          build_graph(2, {{0, 1}}, RealMatrix(2, 1), std::nullopt, t);
        }) == ErrorCode::kConflictingTargets);

  const auto loop = build_graph(2, {{1, 1}}, RealMatrix(2, 1), std::nullopt, {}, GraphOptions{true});
  CHECK(loop.num_edges() == 1);
}

TEST_CASE("reciprocal pair with edge features and node targets") {
  Targets t;
  t.node = RealMatrix(3, 1);
  const auto g = build_graph(3, {{0, 1}, {1, 0}}, RealMatrix(3, 2), RealMatrix(2, 1), t);
  CHECK(g.num_edges() == 2);
  CHECK(g.edge_features()->rows == 2);
}

TEST_CASE("degree_total counts in and out edges") {
  CHECK(degree_total(build_graph(2, {{0, 1}}, RealMatrix(2, 1))) == std::vector<double>{1, 1});
  CHECK(degree_total(build_graph(2, {{0, 1}, {1, 0}}, RealMatrix(2, 1))) == std::vector<double>{2, 2});
  CHECK(degree_total(build_graph(3, {{0, 1}, {0, 2}, {2, 0}}, RealMatrix(3, 1))) == std::vector<double>{3, 1, 2});
}

TEST_CASE("reverse_edges is an involution that preserves degree") {
  const auto g = build_graph(2, {{0, 1}}, RealMatrix(2, 1));
  CHECK(reverse_edges(g).edges() == std::vector<Edge>{{1, 0}});

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    testing::RandomGraphOptions opt;
    opt.edge_features = 2;
    const auto r = testing::random_graph(3 + trial % 7, rng, opt);
    const auto rev = reverse_edges(r);
    CHECK(reverse_edges(rev) == r);
    CHECK(degree_total(rev) == degree_total(r));
    for (std::size_t k = 0; k < r.num_edges(); ++k) {
      CHECK(rev.edges()[k].src == r.edges()[k].dst);
      CHECK((*rev.edge_features())(k, 1) == (*r.edge_features())(k, 1));
    }
  }
}

TEST_CASE("longest path on small graphs") {
  CHECK(longest_path_length(build_graph(1, {}, RealMatrix(1, 1))) == 0.0);
  CHECK(longest_path_length(build_graph(2, {{0, 1}}, RealMatrix(2, 1))) == 1.0);
  CHECK(longest_path_length(build_graph(4, {{0, 1}, {1, 2}, {0, 3}, {3, 2}, {0, 2}}, RealMatrix(4, 1))) == 2.0);
  CHECK(code_of([] { longest_path_length(build_graph(2, {{0, 1}, {1, 0}}, RealMatrix(2, 1))); }) ==
        ErrorCode::kInvalidSpec);
}

TEST_CASE("metric directions") {
  CHECK(metric_direction("mse") == MetricDirection::kLowerBetter);
  CHECK(metric_direction("rmse") == MetricDirection::kLowerBetter);
  for (const char* m : {"r2", "accuracy", "precision", "recall", "f1", "acc5", "acc10"}) {
    CHECK(metric_direction(m) == MetricDirection::kHigherBetter);
  }
  CHECK(code_of([] { metric_direction("mae"); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("generate_synthetic is deterministic and well formed") {
  const auto spec = ten_graph_spec();
  const auto a = generate_synthetic(spec, 0);
  const auto b = generate_synthetic(spec, 0);
  CHECK(a == b);
  CHECK(a.graphs.size() == 10);
  CHECK_NOTHROW(validate_dataset(a));
  CHECK(generate_synthetic(spec, 1) != a);

  for (std::size_t i = 0; i < a.graphs.size(); ++i) {
    const auto& g = a.graphs[i];
    CHECK(is_acyclic(g));
    CHECK(g.targets().graph->front() == longest_path_length(g));
    if (a.splits[i] == Split::kTestOod) {
      CHECK(g.num_nodes() > spec.max_nodes);
    } else {
      CHECK(g.num_nodes() >= spec.min_nodes);
      CHECK(g.num_nodes() <= spec.max_nodes);
    }
  }
}

TEST_CASE("motif labels count feed-forward loops") {
  // 0->1, 1->2, 0->2: node 0 roots one loop.
  const auto g = build_graph(3, {{0, 1}, {1, 2}, {0, 2}}, RealMatrix(3, 1));
  CHECK(motif_labels(g, 3) == std::vector<double>{1, 0, 0});

  SyntheticSpec s = ten_graph_spec();
  s.label_rule = LabelRule::kLocalMotifCount;
  const auto d = generate_synthetic(s, 3);
  CHECK(d.task.level == TaskLevel::kNode);
  CHECK(d.task.objective == Objective::kClassification);
  CHECK_NOTHROW(validate_dataset(d));
}

TEST_CASE("generate_synthetic rejects bad specs") {
  auto s = ten_graph_spec();
  s.min_nodes = 1;
  CHECK(code_of([&] { generate_synthetic(s, 0); }) == ErrorCode::kInvalidSpec);
  s = ten_graph_spec();
  s.density = 0.0;
  CHECK(code_of([&] { generate_synthetic(s, 0); }) == ErrorCode::kInvalidSpec);
  s = ten_graph_spec();
  s.dag_only = false;
  CHECK(code_of([&] { generate_synthetic(s, 0); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("dataset round trip") {
  const auto d = generate_synthetic(ten_graph_spec(), 0);
  std::stringstream first;
  save_dataset(d, first);
  const std::string text = first.str();
  std::stringstream in(text);
  const auto loaded = load_dataset(in);
  CHECK(loaded == d);
  std::stringstream second;
  save_dataset(loaded, second);
  CHECK(second.str() == text);
  for (std::size_t i = 0; i < d.graphs.size(); ++i) CHECK(loaded.graphs[i].edges() == d.graphs[i].edges());
}

TEST_CASE("round trip keeps edge features, node masks and awkward floats") {
  std::mt19937_64 rng(11);
  testing::RandomGraphOptions opt;
  opt.edge_features = 2;
  auto g = testing::random_graph(5, rng, opt);
  RealMatrix y(5, 1);
  for (std::size_t i = 0; i < 5; ++i) y(i, 0) = static_cast<double>(i % 2);
  y.data[0] = 0.1;
  Dataset d;
  d.task = make_task(TaskLevel::kNode, Objective::kRegression, 1, {"mse"});
  Targets t;
  t.node = y;
  d.graphs.push_back(build_graph(5, g.edges(), g.node_features(), g.edge_features(), t));
  d.splits = {Split::kMasked};
  d.node_splits = {{Split::kTrain, Split::kTrain, Split::kVal, Split::kTestId, Split::kTestOod}};
  CHECK_NOTHROW(validate_dataset(d));

  std::stringstream out;
  save_dataset(d, out);
  std::stringstream in(out.str());
  CHECK(load_dataset(in) == d);
}

TEST_CASE("load_dataset reports schema, parse and split errors") {
  const std::string header = R"({"task":{"level":"graph","objective":"regression","dim":1,"metrics":["mse"]}})";
  auto load = [](const std::string& text) {
    std::stringstream in(text);
    return load_dataset(in);
  };
  const auto one = load(header + "\n" + R"({"num_nodes":2,"edges":[[0,1]],"x":[[0],[0]],"y_graph":[1.0],"split":"train"})");
  CHECK(one.graphs.size() == 1);

  try {
    load(header + "\n" + R"({"num_nodes":2,"x":[[0],[0]],"y_graph":[1.0],"split":"train"})");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchemaError);
    CHECK(std::string(e.what()).find("edges") != std::string::npos);
  }

  try {
    load(header + "\n{not json");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  CHECK(code_of([&] { load(header + "\n" + R"({"num_nodes":2,"edges":[[0,1]],"x":[[0],[0]],"y_graph":[1.0]})"); }) ==
        ErrorCode::kSplitError);
}
