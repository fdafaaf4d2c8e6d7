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

#include "dgrl/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgrl/error.hpp"
#include "json.hpp"

namespace dgrl {

using nlohmann::json;

std::string format_float17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_row(std::ostream& out, const double* begin, std::size_t count) {
  out << '[';
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out << ',';
    out << format_float17(begin[i]);
  }
  out << ']';
}

void write_matrix(std::ostream& out, const RealMatrix& m) {
  out << '[';
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (r) out << ',';
    write_row(out, m.data.data() + r * m.cols, m.cols);
  }
  out << ']';
}

std::string level_name(TaskLevel l) { return l == TaskLevel::kNode ? "node" : "graph"; }
std::string objective_name(Objective o) { return o == Objective::kRegression ? "regression" : "classification"; }

void write_header(std::ostream& out, const TaskSpec& t) {
  json task;
  task["level"] = level_name(t.level);
  task["objective"] = objective_name(t.objective);
  if (t.objective == Objective::kRegression) {
    task["dim"] = t.dim;
  } else {
    task["num_classes"] = t.dim;
  }
  task["metrics"] = t.metrics;
  out << json{{"task", task}}.dump() << '\n';
}

void write_record(std::ostream& out, const DirectedGraph& g, Split split, const std::vector<Split>& node_split) {
  out << "{\"num_nodes\":" << g.num_nodes() << ",\"edges\":[";
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    if (k) out << ',';
    out << '[' << g.edges()[k].src << ',' << g.edges()[k].dst << ']';
  }
  out << "],\"x\":";
  write_matrix(out, g.node_features());
  if (g.edge_features()) {
    out << ",\"edge_attr\":";
    write_matrix(out, *g.edge_features());
  }
  if (g.targets().node) {
    out << ",\"y_node\":";
    write_matrix(out, *g.targets().node);
  }
  if (g.targets().graph) {
    out << ",\"y_graph\":";
    write_row(out, g.targets().graph->data(), g.targets().graph->size());
  }
  out << ",\"split\":\"" << split_name(split) << '"';
  if (split == Split::kMasked) {
    out << ",\"node_split\":[";
    for (std::size_t i = 0; i < node_split.size(); ++i) {
      if (i) out << ',';
      out << '"' << split_name(node_split[i]) << '"';
    }
    out << ']';
  }
  out << "}\n";
}

[[noreturn]] void schema(std::size_t line, const std::string& what) {
  fail(ErrorCode::kSchemaError, "line " + std::to_string(line) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) schema(line, std::string("missing field \"") + key + "\"");
  return *it;
}

// Accepts both [[..],[..]] and a flat [a, b] (one value per row).
RealMatrix read_matrix(const json& j, const char* key, std::size_t line) {
  if (!j.is_array()) schema(line, std::string("field \"") + key + "\" must be an array");
  RealMatrix m;
  m.rows = j.size();
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    std::size_t width = row.is_array() ? row.size() : 1;
    if (r == 0) {
      m.cols = width;
    } else if (width != m.cols) {
      schema(line, std::string("field \"") + key + "\" has ragged rows");
    }
    if (row.is_array()) {
      for (const auto& v : row) {
        if (!v.is_number()) schema(line, std::string("field \"") + key + "\" holds a non-number");
        m.data.push_back(v.get<double>());
      }
    } else if (row.is_number()) {
      m.data.push_back(row.get<double>());
    } else {
      schema(line, std::string("field \"") + key + "\" holds a non-number");
    }
  }
  return m;
}

TaskSpec read_header(const json& j, std::size_t line) {
  const json& task = require(j, "task", line);
  const auto level = require(task, "level", line).get<std::string>();
  const auto objective = require(task, "objective", line).get<std::string>();
  if (level != "node" && level != "graph") schema(line, "task.level must be node or graph");
  if (objective != "regression" && objective != "classification") {
    schema(line, "task.objective must be regression or classification");
  }
  const bool regression = objective == "regression";
  const std::size_t dim = require(task, regression ? "dim" : "num_classes", line).get<std::size_t>();
  std::vector<std::string> metrics;
  if (auto it = task.find("metrics"); it != task.end()) metrics = it->get<std::vector<std::string>>();
  return make_task(level == "node" ? TaskLevel::kNode : TaskLevel::kGraph,
                   regression ? Objective::kRegression : Objective::kClassification, dim, std::move(metrics));
}

}  // namespace

void save_dataset(const Dataset& d, std::ostream& out) {
  write_header(out, d.task);
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    static const std::vector<Split> kNone;
    write_record(out, d.graphs[i], d.splits[i], i < d.node_splits.size() ? d.node_splits[i] : kNone);
  }
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot open " + path + " for writing");
  save_dataset(d, out);
}

Dataset load_dataset(std::istream& in) {
  Dataset d;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": expected a JSON object");
    try {
      if (!have_header) {
        d.task = read_header(j, line);
        have_header = true;
        continue;
      }
      const auto n = require(j, "num_nodes", line).get<std::size_t>();
      const json& edges_json = require(j, "edges", line);
      std::vector<Edge> edges;
      for (const auto& e : edges_json) {
        if (!e.is_array() || e.size() != 2) schema(line, "edges entries must be [src, dst] pairs");
        edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
      }
      RealMatrix x = read_matrix(require(j, "x", line), "x", line);
      if (x.rows == 0) x.rows = n;
      std::optional<RealMatrix> edge_attr;
      if (auto it = j.find("edge_attr"); it != j.end()) edge_attr = read_matrix(*it, "edge_attr", line);
      Targets t;
      if (auto it = j.find("y_node"); it != j.end()) t.node = read_matrix(*it, "y_node", line);
      if (auto it = j.find("y_graph"); it != j.end()) {
        if (it->is_number()) {
          t.graph = std::vector<double>{it->get<double>()};
        } else {
          t.graph = it->get<std::vector<double>>();
        }
      }
      if (!t.node && !t.graph) schema(line, "missing field \"y_node\" or \"y_graph\"");
      auto split_it = j.find("split");
      if (split_it == j.end()) {
        fail(ErrorCode::kSplitError, "line " + std::to_string(line) + ": graph has no \"split\" tag");
      }
      auto split = parse_split(split_it->get<std::string>());
      if (!split) fail(ErrorCode::kSplitError, "line " + std::to_string(line) + ": unknown split tag");
      std::vector<Split> node_split;
      if (*split == Split::kMasked) {
        auto ns = j.find("node_split");
        if (ns == j.end()) schema(line, "missing field \"node_split\" for a masked graph");
        for (const auto& tag : *ns) {
          auto s = parse_split(tag.get<std::string>());
          if (!s) fail(ErrorCode::kSplitError, "line " + std::to_string(line) + ": unknown node split tag");
          node_split.push_back(*s);
        }
      }
      try {
        d.graphs.push_back(build_graph(n, std::move(edges), std::move(x), std::move(edge_attr), std::move(t)));
      } catch (const Error& e) {
        fail(e.code(), "line " + std::to_string(line) + ": " + e.what());
      }
      d.splits.push_back(*split);
      d.node_splits.push_back(std::move(node_split));
    } catch (const json::exception& e) {
      schema(line, e.what());
    }
  }
  if (!have_header) fail(ErrorCode::kSchemaError, "missing task header line");
  validate_dataset(d);
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return load_dataset(in);
}

}  // namespace dgrl
