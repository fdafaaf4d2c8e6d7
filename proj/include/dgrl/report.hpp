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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgrl/graph.hpp"
#include "dgrl/training.hpp"

namespace dgrl {

struct ResultEntry {
  std::string method;
  std::string dataset;
  std::string task;
  std::string metric;
  MetricDirection direction = MetricDirection::kLowerBetter;
  double value = 0.0;
  std::optional<double> std;

  bool operator==(const ResultEntry&) const = default;
};

class ResultsTable {
 public:
  /// Throws SchemaError on a second entry for the same (method, task, metric)
  /// or a task filed under two datasets.
  void add(ResultEntry e);

  const std::vector<ResultEntry>& entries() const { return entries_; }
  std::vector<std::string> methods() const;
  /// (dataset, task, metric) columns, grouped by dataset, sorted.
  std::vector<std::tuple<std::string, std::string, std::string>> columns() const;
  const ResultEntry* find(const std::string& method, const std::string& task, const std::string& metric) const;
  bool empty() const { return entries_.empty(); }

  /// Same entries regardless of insertion order.
  bool operator==(const ResultsTable& other) const;

 private:
  std::vector<ResultEntry> entries_;
};

/// Entries of one split; dataset falls back to the task name when absent.
ResultsTable table_from_records(const std::vector<ResultRecord>& records, const std::string& split);

struct RankTable {
  /// (task, metric) -> method -> rank.
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> column_ranks;
  /// Average over the metrics of a task present for the method.
  std::map<std::pair<std::string, std::string>, double> by_task;      // (method, task)
  /// Average over all (task, metric) columns of a dataset present for the method.
  std::map<std::pair<std::string, std::string>, double> by_dataset;   // (method, dataset)
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
};

/// Lower-better columns rank ascending with min ties, higher-better columns
/// descending with max ties. Missing cells are excluded per method.
/// Throws EmptyColumn when a column has fewer than two methods.
RankTable rank_table(const ResultsTable& results);

struct TopScore {
  std::string method;
  std::size_t first_count = 0;
  std::size_t topk_count = 0;
  std::size_t datasets = 0;
};

/// Per dataset a method's position is 1 + the number of methods with a
/// strictly smaller average rank.
std::vector<TopScore> top_score(const RankTable& ranks, std::size_t k = 3);

enum class TableFormat { kMarkdown, kCsv };
TableFormat parse_table_format(const std::string& name);

/// Methods as rows, (dataset, task, metric) as columns, "m±s" cells with three
/// decimals and "- -" for missing cells.
std::string render(const ResultsTable& table, TableFormat format);
/// Average rank per dataset plus first / top-k counts.
std::string render_ranks(const RankTable& ranks, TableFormat format, std::size_t k = 3);

/// Inverse of render(table, kCsv).
ResultsTable parse_results_csv(const std::string& text);

}  // namespace dgrl
