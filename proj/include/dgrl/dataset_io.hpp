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

#include <iosfwd>
#include <string>

#include "dgrl/graph.hpp"

namespace dgrl {

/// JSONL dataset files.
///
/// Line 1 is a header {"task": {"level", "objective", "dim"|"num_classes",
/// "metrics"}}; every further line is one graph record with keys "num_nodes",
/// "edges", "x", optional "edge_attr", one of "y_node"/"y_graph", and
/// "split" (plus "node_split" when split is "masked"). Floats are written
/// with 17 significant digits so a save/load/save cycle is byte-identical.
void save_dataset(const Dataset& d, std::ostream& out);
void save_dataset(const Dataset& d, const std::string& path);

/// Throws ParseError (with line number), SchemaError (naming the missing
/// field) or SplitError.
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

/// "%.17g" rendering used by every text format in the project.
std::string format_float17(double v);

}  // namespace dgrl
