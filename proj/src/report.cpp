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

#include "dgrl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "dgrl/error.hpp"

namespace dgrl {

void ResultsTable::add(ResultEntry e) {
  for (const ResultEntry& x : entries_) {
    if (x.method == e.method && x.task == e.task && x.metric == e.metric) {
      fail(ErrorCode::kSchemaError, "duplicate result for (" + e.method + ", " + e.task + ", " + e.metric + ")");
    }
    if (x.task == e.task && x.dataset != e.dataset) {
      fail(ErrorCode::kSchemaError, "task '" + e.task + "' listed under datasets '" + x.dataset + "' and '" +
                                        e.dataset + "'");
    }
    if (x.task == e.task && x.metric == e.metric && x.direction != e.direction) {
      fail(ErrorCode::kSchemaError, "metric '" + e.metric + "' has conflicting directions");
    }
  }
  entries_.push_back(std::move(e));
}

std::vector<std::string> ResultsTable::methods() const {
  std::set<std::string> s;
  for (const ResultEntry& e : entries_) s.insert(e.method);
  return {s.begin(), s.end()};
}

std::vector<std::tuple<std::string, std::string, std::string>> ResultsTable::columns() const {
  std::set<std::tuple<std::string, std::string, std::string>> s;
  for (const ResultEntry& e : entries_) s.emplace(e.dataset, e.task, e.metric);
  return {s.begin(), s.end()};
}

const ResultEntry* ResultsTable::find(const std::string& method, const std::string& task,
                                      const std::string& metric) const {
  for (const ResultEntry& e : entries_) {
    if (e.method == method && e.task == task && e.metric == metric) return &e;
  }
  return nullptr;
}

bool ResultsTable::operator==(const ResultsTable& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const ResultEntry& e : entries_) {
    const ResultEntry* o = other.find(e.method, e.task, e.metric);
    if (!o || !(*o == e)) return false;
  }
  return true;
}

ResultsTable table_from_records(const std::vector<ResultRecord>& records, const std::string& split) {
  ResultsTable t;
  for (const ResultRecord& r : records) {
    if (r.split != split) continue;
    t.add({r.method, r.dataset.empty() ? r.task : r.dataset, r.task, r.metric, metric_direction(r.metric), r.mean,
           r.std});
  }
  return t;
}

RankTable rank_table(const ResultsTable& results) {
  RankTable out;
  out.methods = results.methods();
  std::map<std::pair<std::string, std::string>, std::vector<const ResultEntry*>> columns;
  std::map<std::string, std::string> task_dataset;
  for (const ResultEntry& e : results.entries()) {
    columns[{e.task, e.metric}].push_back(&e);
    task_dataset[e.task] = e.dataset;
  }

  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> task_acc, dataset_acc;
  for (auto& [key, col] : columns) {
    if (col.size() < 2) {
      fail(ErrorCode::kEmptyColumn, "column (" + key.first + ", " + key.second + ") has " +
                                        std::to_string(col.size()) + " method(s), ranking needs at least 2");
    }
    const bool lower = col.front()->direction == MetricDirection::kLowerBetter;
    std::vector<const ResultEntry*> sorted = col;
    std::stable_sort(sorted.begin(), sorted.end(), [lower](const ResultEntry* a, const ResultEntry* b) {
      return lower ? a->value < b->value : a->value > b->value;
    });
    auto& ranks = out.column_ranks[key];
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j]->value == sorted[i]->value) ++j;
      // Block occupies positions i+1 .. j.
      const double r = lower ? static_cast<double>(i + 1) : static_cast<double>(j);
      for (std::size_t t = i; t < j; ++t) ranks[sorted[t]->method] = r;
      i = j;
    }
    const std::string& dataset = task_dataset[key.first];
    for (const auto& [method, r] : ranks) {
      auto& ta = task_acc[{method, key.first}];
      ta.first += r;
      ++ta.second;
      auto& da = dataset_acc[{method, dataset}];
      da.first += r;
      ++da.second;
    }
  }
  for (const auto& [k, acc] : task_acc) out.by_task[k] = acc.first / static_cast<double>(acc.second);
  std::set<std::string> datasets;
  for (const auto& [k, acc] : dataset_acc) {
    out.by_dataset[k] = acc.first / static_cast<double>(acc.second);
    datasets.insert(k.second);
  }
  out.datasets.assign(datasets.begin(), datasets.end());
  return out;
}

std::vector<TopScore> top_score(const RankTable& ranks, std::size_t k) {
  std::vector<TopScore> out;
  for (const std::string& m : ranks.methods) {
    TopScore s;
    s.method = m;
    for (const std::string& d : ranks.datasets) {
      auto it = ranks.by_dataset.find({m, d});
      if (it == ranks.by_dataset.end()) continue;
      ++s.datasets;
      std::size_t position = 1;
      for (const std::string& other : ranks.methods) {
        auto jt = ranks.by_dataset.find({other, d});
        if (jt != ranks.by_dataset.end() && jt->second < it->second) ++position;
      }
      if (position == 1) ++s.first_count;
      if (position <= k) ++s.topk_count;
    }
    out.push_back(s);
  }
  return out;
}

TableFormat parse_table_format(const std::string& name) {
  if (name == "markdown" || name == "md") return TableFormat::kMarkdown;
  if (name == "csv") return TableFormat::kCsv;
  fail(ErrorCode::kConfigError, "unknown format '" + name + "' (expected markdown or csv)");
}

namespace {

constexpr const char* kMissing = "- -";
constexpr const char* kPm = "\xC2\xB1";  // ±

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string cell(const ResultEntry* e) {
  if (!e) return kMissing;
  return e->std ? fixed3(e->value) + kPm + fixed3(*e->std) : fixed3(e->value);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string join_row(const std::vector<std::string>& cells, TableFormat f) {
  std::string line;
  if (f == TableFormat::kMarkdown) {
    line = "|";
    for (const std::string& c : cells) line += " " + c + " |";
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + csv_field(cells[i]);
  }
  return line + "\n";
}

std::string separator(std::size_t n) {
  std::string line = "|";
  for (std::size_t i = 0; i < n; ++i) line += "---|";
  return line + "\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) fail(ErrorCode::kParseError, "csv: unterminated quote");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kParseError, "csv: bad number '" + s + "'");
  }
  if (used != s.size()) fail(ErrorCode::kParseError, "csv: bad number '" + s + "'");
  return v;
}

}  // namespace

std::string render(const ResultsTable& table, TableFormat format) {
  const auto methods = table.methods();
  const auto columns = table.columns();
  std::vector<std::string> header{"method"};
  for (const auto& [dataset, task, metric] : columns) {
    const ResultEntry* any = nullptr;
    for (const ResultEntry& e : table.entries()) {
      if (e.task == task && e.metric == metric) any = &e;
    }
    const bool lower = any->direction == MetricDirection::kLowerBetter;
    if (format == TableFormat::kMarkdown) {
      header.push_back(dataset + "/" + task + " " + metric + (lower ? " \xE2\x86\x93" : " \xE2\x86\x91"));
    } else {
      header.push_back(dataset + "|" + task + "|" + metric + "|" + (lower ? "lower" : "higher"));
    }
  }
  std::string out = join_row(header, format);
  if (format == TableFormat::kMarkdown) out += separator(header.size());
  for (const std::string& m : methods) {
    std::vector<std::string> row{m};
    for (const auto& [dataset, task, metric] : columns) row.push_back(cell(table.find(m, task, metric)));
    out += join_row(row, format);
  }
  return out;
}

std::string render_ranks(const RankTable& ranks, TableFormat format, std::size_t k) {
  std::vector<std::string> header{"method"};
  for (const std::string& d : ranks.datasets) header.push_back(d);
  header.push_back("first");
  header.push_back("top" + std::to_string(k));
  std::string out = join_row(header, format);
  if (format == TableFormat::kMarkdown) out += separator(header.size());
  const auto scores = top_score(ranks, k);
  for (std::size_t i = 0; i < ranks.methods.size(); ++i) {
    const std::string& m = ranks.methods[i];
    std::vector<std::string> row{m};
    for (const std::string& d : ranks.datasets) {
      auto it = ranks.by_dataset.find({m, d});
      row.push_back(it == ranks.by_dataset.end() ? kMissing : fixed3(it->second));
    }
    row.push_back(std::to_string(scores[i].first_count));
    row.push_back(std::to_string(scores[i].topk_count));
    out += join_row(row, format);
  }
  return out;
}

ResultsTable parse_results_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  ResultsTable t;
  if (rows.empty()) return t;
  const auto& header = rows.front();
  if (header.empty() || header.front() != "method") fail(ErrorCode::kParseError, "csv: first column must be 'method'");
  struct Col {
    std::string dataset, task, metric;
    MetricDirection dir;
  };
  std::vector<Col> cols;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto parts = split_on(header[i], '|');
    if (parts.size() != 4 || (parts[3] != "lower" && parts[3] != "higher")) {
      fail(ErrorCode::kParseError, "csv: bad column header '" + header[i] + "'");
    }
    cols.push_back({parts[0], parts[1], parts[2],
                    parts[3] == "lower" ? MetricDirection::kLowerBetter : MetricDirection::kHigherBetter});
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      fail(ErrorCode::kParseError, "csv: row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                       " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] == kMissing) continue;
      const Col& col = cols[c - 1];
      ResultEntry e{row[0], col.dataset, col.task, col.metric, col.dir, 0.0, std::nullopt};
      const std::size_t pm = row[c].find(kPm);
      if (pm == std::string::npos) {
        e.value = parse_number(row[c]);
      } else {
        e.value = parse_number(row[c].substr(0, pm));
        e.std = parse_number(row[c].substr(pm + 2));
      }
      t.add(std::move(e));
    }
  }
  return t;
}

}  // namespace dgrl
