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

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "dgrl/error.hpp"
#include "dgrl/report.hpp"

using namespace dgrl;

namespace {

constexpr MetricDirection kLower = MetricDirection::kLowerBetter;
constexpr MetricDirection kHigher = MetricDirection::kHigherBetter;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected dgrl::Error");
  return ErrorCode::kIoError;
}

ResultsTable one_column(const std::vector<std::pair<std::string, double>>& values, MetricDirection dir) {
  ResultsTable t;
  for (const auto& [m, v] : values) t.add({m, "D", "t", "metric", dir, v, std::nullopt});
  return t;
}

// Rank by direct comparison against every other method in the column.
double pairwise_rank(const std::vector<const ResultEntry*>& col, const ResultEntry& e) {
  std::size_t r = 1;
  for (const ResultEntry* o : col) {
    if (o == &e) continue;
    if (e.direction == kLower) r += o->value < e.value;
    else r += o->value >= e.value;
  }
  return static_cast<double>(r);
}

ResultsTable random_table(std::mt19937_64& rng, std::size_t& methods_out) {
  std::uniform_int_distribution<std::size_t> n_methods(2, 7), n_tasks(1, 4), n_metrics(1, 3), n_datasets(1, 3);
  std::uniform_int_distribution<int> level(0, 4);  // few levels so ties are common
  std::bernoulli_distribution missing(0.2), lower(0.5);
  const std::size_t k = n_methods(rng);
  methods_out = k;
  const std::size_t datasets = n_datasets(rng);
  ResultsTable t;
  for (std::size_t task = 0; task < n_tasks(rng); ++task) {
    const std::string dataset = "D" + std::to_string(task % datasets);
    for (std::size_t metric = 0; metric < n_metrics(rng); ++metric) {
      const MetricDirection dir = lower(rng) ? kLower : kHigher;
      std::size_t present = 0;
      for (std::size_t m = 0; m < k; ++m) {
        // Keep at least two methods per column.
        if (missing(rng) && present + (k - m) > 2) continue;
        t.add({"M" + std::to_string(m), dataset, "T" + std::to_string(task), "m" + std::to_string(metric), dir,
               level(rng) / 10.0, std::nullopt});
        ++present;
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("rank examples") {
  const RankTable lo = rank_table(one_column({{"A", 1.0}, {"B", 2.0}, {"C", 2.0}}, kLower));
  const auto& lr = lo.column_ranks.at({"t", "metric"});
  CHECK(lr.at("A") == 1.0);
  CHECK(lr.at("B") == 2.0);
  CHECK(lr.at("C") == 2.0);

  const RankTable hi = rank_table(one_column({{"A", 0.9}, {"B", 0.9}, {"C", 0.1}}, kHigher));
  const auto& hr = hi.column_ranks.at({"t", "metric"});
  CHECK(hr.at("A") == 2.0);
  CHECK(hr.at("B") == 2.0);
  CHECK(hr.at("C") == 3.0);

  ResultsTable two;
  two.add({"A", "D", "t", "mse", kLower, 0.1, std::nullopt});
  two.add({"B", "D", "t", "mse", kLower, 0.2, std::nullopt});
  two.add({"C", "D", "t", "mse", kLower, 0.3, std::nullopt});
  two.add({"A", "D", "t", "r2", kHigher, 0.1, std::nullopt});
  two.add({"B", "D", "t", "r2", kHigher, 0.2, std::nullopt});
  two.add({"C", "D", "t", "r2", kHigher, 0.3, std::nullopt});
  const RankTable r = rank_table(two);
  CHECK(r.by_task.at({"A", "t"}) == 2.0);
  CHECK(r.by_dataset.at({"A", "D"}) == 2.0);
  CHECK(r.by_task.at({"B", "t"}) == 2.0);
}

TEST_CASE("missing cells are excluded from the average") {
  ResultsTable t;
  t.add({"A", "D", "t1", "mse", kLower, 1.0, std::nullopt});
  t.add({"B", "D", "t1", "mse", kLower, 2.0, std::nullopt});
  t.add({"C", "D", "t1", "mse", kLower, 3.0, std::nullopt});
  t.add({"B", "D", "t2", "mse", kLower, 1.0, std::nullopt});
  t.add({"C", "D", "t2", "mse", kLower, 2.0, std::nullopt});
  const RankTable r = rank_table(t);
  CHECK(r.column_ranks.at({"t2", "mse"}).count("A") == 0);
  CHECK(r.by_dataset.at({"A", "D"}) == 1.0);
  CHECK(r.by_dataset.at({"B", "D"}) == 1.5);
  CHECK(r.by_dataset.at({"C", "D"}) == 2.5);
  CHECK(r.by_task.count({"A", "t2"}) == 0);
}

TEST_CASE("rank errors") {
  CHECK(code_of([] { rank_table(one_column({{"A", 1.0}}, kLower)); }) == ErrorCode::kEmptyColumn);
  ResultsTable t;
  t.add({"A", "D", "t", "mse", kLower, 1.0, std::nullopt});
  CHECK(code_of([&] { t.add({"A", "D", "t", "mse", kLower, 2.0, std::nullopt}); }) == ErrorCode::kSchemaError);
  CHECK(code_of([&] { t.add({"B", "E", "t", "mse", kLower, 2.0, std::nullopt}); }) == ErrorCode::kSchemaError);
  CHECK(code_of([&] { t.add({"B", "D", "t", "mse", kHigher, 2.0, std::nullopt}); }) == ErrorCode::kSchemaError);
  CHECK(rank_table(ResultsTable{}).methods.empty());
}

TEST_CASE("top_score") {
  SUBCASE("single dataset") {
    const RankTable r = rank_table(one_column({{"A", 1.0}, {"B", 2.0}, {"C", 3.0}}, kLower));
    const auto s = top_score(r);
    CHECK(s[0].method == "A");
    CHECK(s[0].first_count == 1);
    CHECK(s[1].first_count == 0);
    CHECK(s[2].topk_count == 1);
  }
  SUBCASE("third of five") {
    const RankTable r =
        rank_table(one_column({{"A", 1.0}, {"B", 2.0}, {"C", 3.0}, {"D", 4.0}, {"E", 5.0}}, kLower));
    const auto s = top_score(r, 3);
    CHECK(s[2].method == "C");
    CHECK(s[2].topk_count == 1);
    CHECK(s[3].topk_count == 0);
  }
  SUBCASE("hand tally over three datasets") {
    RankTable r;
    r.methods = {"A", "B", "C", "D"};
    r.datasets = {"X", "Y", "Z"};
    const std::map<std::string, std::vector<double>> avg{
        {"A", {1.0, 3.0, 2.5}}, {"B", {2.0, 1.0, 2.5}}, {"C", {3.0, 2.0, 1.0}}, {"D", {4.0, 4.0, 4.0}}};
    for (const auto& [m, v] : avg) {
      for (std::size_t d = 0; d < 3; ++d) r.by_dataset[{m, r.datasets[d]}] = v[d];
    }
    const auto s = top_score(r, 2);
    // X: A,B,C,D  Y: B,C,A,D  Z: C, then A and B tied at 2.
    CHECK(s[0].first_count == 1);
    CHECK(s[0].topk_count == 2);
    CHECK(s[1].first_count == 1);
    CHECK(s[1].topk_count == 3);
    CHECK(s[2].first_count == 1);
    CHECK(s[2].topk_count == 2);
    CHECK(s[3].first_count == 0);
    CHECK(s[3].topk_count == 0);
    CHECK(s[3].datasets == 3);
  }
}

TEST_CASE("rank_table matches the pairwise oracle") {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t k = 0;
    const ResultsTable t = random_table(rng, k);
    const RankTable r = rank_table(t);
    std::map<std::pair<std::string, std::string>, std::vector<const ResultEntry*>> cols;
    for (const ResultEntry& e : t.entries()) cols[{e.task, e.metric}].push_back(&e);
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> by_dataset;
    for (const auto& [key, col] : cols) {
      for (const ResultEntry* e : col) {
        const double expect = pairwise_rank(col, *e);
        REQUIRE(r.column_ranks.at(key).at(e->method) == expect);
        auto& acc = by_dataset[{e->method, e->dataset}];
        acc.first += expect;
        ++acc.second;
      }
    }
    REQUIRE(r.by_dataset.size() == by_dataset.size());
    for (const auto& [key, acc] : by_dataset) REQUIRE(r.by_dataset.at(key) == doctest::Approx(acc.first / acc.second));
  }
}

TEST_CASE("rank properties") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 8;
    std::vector<std::pair<std::string, double>> values, transformed;
    for (std::size_t m = 0; m < k; ++m) {
      const double v = u(rng);  // continuous, so untied
      values.push_back({"M" + std::to_string(m), v});
      transformed.push_back({"M" + std::to_string(m), std::exp(v) + 3.0 * v});
    }
    for (MetricDirection dir : {kLower, kHigher}) {
      const auto a = rank_table(one_column(values, dir)).column_ranks.at({"t", "metric"});
      const auto b = rank_table(one_column(transformed, dir)).column_ranks.at({"t", "metric"});
      CHECK(a == b);
      double sum = 0.0;
      for (const auto& [m, r] : a) sum += r;
      CHECK(sum == static_cast<double>(k * (k + 1) / 2));
    }
  }
}

TEST_CASE("render") {
  CHECK(render(ResultsTable{}, TableFormat::kMarkdown) == "| method |\n|---|\n");
  CHECK(render(ResultsTable{}, TableFormat::kCsv) == "method\n");

  ResultsTable t;
  t.add({"gin", "D", "t", "mse", kLower, 0.125, 0.01});
  t.add({"gat", "D", "t", "mse", kLower, 0.5, std::nullopt});
  t.add({"gin", "D", "u", "acc", kHigher, 0.75, 0.002});
  const std::string md = render(t, TableFormat::kMarkdown);
  CHECK(md.find("- -") != std::string::npos);
  CHECK(md.find("0.125\xC2\xB1" "0.010") != std::string::npos);
  // Methods sorted.
  CHECK(md.find("| gat |") < md.find("| gin |"));
  CHECK(render(t, TableFormat::kMarkdown) == md);

  const std::string csv = render(t, TableFormat::kCsv);
  CHECK(parse_results_csv(csv) == t);
  CHECK(render(parse_results_csv(csv), TableFormat::kCsv) == csv);

  CHECK(parse_table_format("csv") == TableFormat::kCsv);
  CHECK(parse_table_format("markdown") == TableFormat::kMarkdown);
  CHECK(code_of([] { parse_table_format("html"); }) == ErrorCode::kConfigError);
  CHECK(code_of([] { parse_results_csv("name,x\n"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_results_csv("method,D|t|mse|lower\ngin,abc\n"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_results_csv("method,D|t|mse|lower\ngin\n"); }) == ErrorCode::kParseError);
}

TEST_CASE("csv round trip on random tables") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t k = 0;
    const ResultsTable t = random_table(rng, k);
    CHECK(parse_results_csv(render(t, TableFormat::kCsv)) == t);
  }
}

TEST_CASE("table_from_records and rank rendering") {
  std::vector<ResultRecord> recs{
      {"gin", "t", "D", "test_id", "mse", 0.2, 0.01, {0, 1}},
      {"gat", "t", "D", "test_id", "mse", 0.1, 0.02, {0, 1}},
      {"gin", "t", "D", "test_ood", "mse", 0.3, 0.01, {0, 1}},
  };
  const ResultsTable id = table_from_records(recs, "test_id");
  CHECK(id.entries().size() == 2);
  CHECK(id.find("gin", "t", "mse")->std == 0.01);
  const std::string ranks = render_ranks(rank_table(id), TableFormat::kMarkdown);
  CHECK(ranks.find("| gat | 1.000 | 1 | 1 |") != std::string::npos);
  CHECK(ranks.find("| gin | 2.000 | 0 | 1 |") != std::string::npos);
}
