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
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgrl/autodiff.hpp"
#include "dgrl/graph.hpp"
#include "dgrl/model.hpp"

namespace dgrl {

struct TrainConfig {
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::size_t epochs_max = 1000;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws ConfigError.
  void validate() const;
  ad::AdamHyper adam() const { return {lr, beta1, beta2, eps}; }
  bool operator==(const TrainConfig&) const = default;
};

bool is_allowed_batch_size(std::size_t b);

struct MetricSet {
  std::map<std::string, double> values;

  bool has(const std::string& name) const { return values.count(name) > 0; }
  /// Throws InvalidSpec for a metric that was not computed.
  double get(const std::string& name) const;
  bool operator==(const MetricSet&) const = default;
};

/// Regression: mean squared error over all entries. Classification: mean
/// cross-entropy of logits [N x C] against class indices [N x 1].
ad::Tensor loss(const ad::Tensor& preds, const ad::Tensor& targets, const TaskSpec& task);

/// Computes the task's metrics. Throws DegenerateTarget (r2 with SST = 0),
/// ShapeMismatch, InvalidSpec.
MetricSet compute_metrics(const RealMatrix& preds, const RealMatrix& targets, const TaskSpec& task);
/// Single-column convenience form.
MetricSet compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets, const TaskSpec& task);

/// True when a is strictly better than b for the metric's direction.
bool metric_better(const std::string& metric, double a, double b);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double elapsed_s = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  MetricSet best_val_metrics;
};

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);
void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

/// Rows of one split within a set of prepared graphs, with their targets.
struct SplitView {
  std::vector<std::size_t> graphs;  // indices into the dataset
};

/// Graph indices (graph tasks) or graphs holding at least one node of the split (node tasks).
SplitView split_view(const Dataset& d, Split s);

/// Evaluation-mode predictions and targets for one split, concatenated in
/// dataset order. Returns nullopt when the split is empty.
std::optional<std::pair<RealMatrix, RealMatrix>> predict_split(const Model& model, const Dataset& d,
                                                                const std::vector<PreparedGraph>& prepared, Split s,
                                                                std::size_t batch_size = 64);

/// Metrics of one split. r2 is left out when the split's targets are constant,
/// unless r2 is the selection metric.
std::optional<MetricSet> evaluate(const Model& model, const Dataset& d, const std::vector<PreparedGraph>& prepared,
                                  Split s, std::size_t batch_size = 64);

/// Mini-batch Adam with early stopping on the first-listed validation metric.
/// On return the model holds the best-validation parameters.
TrainResult train(Model& model, const Dataset& d, const std::vector<PreparedGraph>& prepared, const TrainConfig& cfg);
TrainResult train(Model& model, const Dataset& d, const TrainConfig& cfg, const pe::PeCache* cache = nullptr);

struct ResultRecord {
  std::string method;
  std::string task;
  std::string dataset;
  std::string split;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::vector<std::uint64_t> seeds;

  bool operator==(const ResultRecord&) const = default;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  TrainResult train;
  std::map<std::string, MetricSet> splits;  // "test_id" / "test_ood"
};

struct ProtocolResult {
  std::vector<SeedOutcome> per_seed;
  std::vector<ResultRecord> records;
};

struct ProtocolOptions {
  std::string method = "model";
  std::string task = "task";
  std::string dataset;
  std::size_t jobs = 1;
  const pe::PeCache* cache = nullptr;
};

/// Trains one model per seed (seed drives both init and training) and
/// aggregates test_id / test_ood metrics as mean and sample std.
ProtocolResult run_protocol(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& d,
                            const std::vector<std::uint64_t>& seeds, const ProtocolOptions& options = {});

std::vector<std::uint64_t> default_seeds();

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& v);
/// "m±s" with three decimals.
std::string format_mean_std(double mean, double std);

std::string results_to_json(const std::vector<ResultRecord>& records);
std::vector<ResultRecord> results_from_json(const std::string& text);

}  // namespace dgrl
