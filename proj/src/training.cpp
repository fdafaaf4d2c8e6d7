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

#include "dgrl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "dgrl/error.hpp"

namespace dgrl {

namespace {

using Clock = std::chrono::steady_clock;

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) fail(ErrorCode::kConvergenceFailure, what + " is not finite (training diverged)");
}

/// Target rows selected for one split inside a batch.
struct Selection {
  std::vector<std::size_t> rows;  // rows of the model output
  RealMatrix targets;
};

std::size_t target_width(const TaskSpec& task) {
  return task.objective == Objective::kClassification ? 1 : task.dim;
}

void append_row(RealMatrix& m, const double* src, std::size_t width) {
  m.data.insert(m.data.end(), src, src + width);
  ++m.rows;
}

/// Rows of the batch output belonging to split s, in batch order.
Selection select(const Dataset& d, const std::vector<std::size_t>& graph_ids, const GraphBatch& batch, Split s) {
  Selection sel;
  const std::size_t w = target_width(d.task);
  sel.targets.cols = w;
  for (std::size_t bi = 0; bi < graph_ids.size(); ++bi) {
    const std::size_t gi = graph_ids[bi];
    const DirectedGraph& g = d.graphs[gi];
    if (d.task.level == TaskLevel::kGraph) {
      if (d.splits[gi] != s) continue;
      if (!g.targets().graph) fail(ErrorCode::kSchemaError, "graph " + std::to_string(gi) + " has no y_graph");
      const auto& y = *g.targets().graph;
      if (y.size() != w) fail(ErrorCode::kShapeMismatch, "graph " + std::to_string(gi) + ": y_graph width differs");
      sel.rows.push_back(bi);
      append_row(sel.targets, y.data(), w);
    } else {
      const bool masked = d.splits[gi] == Split::kMasked;
      if (!masked && d.splits[gi] != s) continue;
      if (!g.targets().node) fail(ErrorCode::kSchemaError, "graph " + std::to_string(gi) + " has no y_node");
      const RealMatrix& y = *g.targets().node;
      if (y.cols != w) fail(ErrorCode::kShapeMismatch, "graph " + std::to_string(gi) + ": y_node width differs");
      for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        if (masked && d.node_splits[gi][i] != s) continue;
        sel.rows.push_back(batch.node_offset[bi] + i);
        append_row(sel.targets, &y.data[i * w], w);
      }
    }
  }
  return sel;
}

std::vector<const PreparedGraph*> pointers(const std::vector<PreparedGraph>& prepared,
                                           const std::vector<std::size_t>& ids) {
  std::vector<const PreparedGraph*> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(&prepared[i]);
  return out;
}

}  // namespace

bool is_allowed_batch_size(std::size_t b) {
  return b == 32 || b == 64 || b == 128 || b == 256 || b == 512 || b == 1024;
}

void TrainConfig::validate() const {
  if (!is_allowed_batch_size(batch_size)) {
    fail(ErrorCode::kConfigError, "train.batch_size must be one of 32, 64, 128, 256, 512, 1024");
  }
  if (!(lr > 0.0)) fail(ErrorCode::kConfigError, "train.lr must be > 0");
  if (epochs_max < 1) fail(ErrorCode::kConfigError, "train.epochs_max must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::kConfigError, "train.beta1/beta2 must lie in [0, 1)");
  }
  if (!(eps > 0.0)) fail(ErrorCode::kConfigError, "train.eps must be > 0");
}

double MetricSet::get(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) fail(ErrorCode::kInvalidSpec, "metric '" + name + "' was not computed");
  return it->second;
}

ad::Tensor loss(const ad::Tensor& preds, const ad::Tensor& targets, const TaskSpec& task) {
  if (task.objective == Objective::kRegression) {
    if (preds.rows() != targets.rows() || preds.cols() != targets.cols()) {
      fail(ErrorCode::kShapeMismatch, "loss: predictions and targets differ in shape");
    }
    return ad::mean(ad::pow(ad::sub(preds, targets), 2.0));
  }
  if (targets.cols() != 1 || targets.rows() != preds.rows()) {
    fail(ErrorCode::kShapeMismatch, "loss: classification targets must be [N x 1] class indices");
  }
  const std::size_t n = preds.rows();
  const std::size_t c = preds.cols();
  if (n == 0) fail(ErrorCode::kShapeMismatch, "loss: empty batch");
  std::vector<double> onehot(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = targets(i, 0);
    if (y < 0 || y >= static_cast<double>(c) || y != std::floor(y)) {
      fail(ErrorCode::kShapeMismatch, "loss: class index out of range");
    }
    onehot[i * c + static_cast<std::size_t>(y)] = 1.0;
  }
  return ad::scale(ad::sum(ad::mask_mul(ad::log_softmax(preds, 1), std::move(onehot))), -1.0 / static_cast<double>(n));
}

MetricSet compute_metrics(const RealMatrix& preds, const RealMatrix& targets, const TaskSpec& task) {
  MetricSet out;
  if (targets.rows == 0) fail(ErrorCode::kShapeMismatch, "metrics: no samples");

  if (task.objective == Objective::kRegression) {
    if (preds.rows != targets.rows || preds.cols != targets.cols) {
      fail(ErrorCode::kShapeMismatch, "metrics: predictions and targets differ in shape");
    }
    const std::size_t n = preds.data.size();
    double sse = 0.0;
    std::size_t hit5 = 0, hit10 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double p = preds.data[k];
      const double t = targets.data[k];
      const double err = std::abs(p - t);
      sse += (p - t) * (p - t);
      if (t == 0.0) {
        if (std::abs(p) < 1e-12) {
          ++hit5;
          ++hit10;
        }
      } else {
        if (err <= 0.05 * std::abs(t)) ++hit5;
        if (err <= 0.10 * std::abs(t)) ++hit10;
      }
    }
    const double mse = sse / static_cast<double>(n);
    for (const std::string& m : task.metrics) {
      if (m == "mse") out.values[m] = mse;
      else if (m == "rmse") out.values[m] = std::sqrt(mse);
      else if (m == "acc5") out.values[m] = static_cast<double>(hit5) / static_cast<double>(n);
      else if (m == "acc10") out.values[m] = static_cast<double>(hit10) / static_cast<double>(n);
      else if (m == "r2") {
        double sst = 0.0;
        for (std::size_t c = 0; c < targets.cols; ++c) {
          double mean = 0.0;
          for (std::size_t r = 0; r < targets.rows; ++r) mean += targets(r, c);
          mean /= static_cast<double>(targets.rows);
          for (std::size_t r = 0; r < targets.rows; ++r) sst += (targets(r, c) - mean) * (targets(r, c) - mean);
        }
        if (sst == 0.0) fail(ErrorCode::kDegenerateTarget, "r2 is undefined: targets have zero variance");
        out.values[m] = 1.0 - sse / sst;
      } else {
        fail(ErrorCode::kInvalidSpec, "metric '" + m + "' does not apply to regression");
      }
    }
    return out;
  }

  if (targets.cols != 1 || preds.rows != targets.rows) {
    fail(ErrorCode::kShapeMismatch, "metrics: classification expects logits [N x C] and labels [N x 1]");
  }
  const std::size_t n = preds.rows;
  const std::size_t c = std::max<std::size_t>(task.dim, preds.cols);
  std::vector<double> tp(c, 0.0), fp(c, 0.0), fn(c, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    if (preds.cols == 1) {
      arg = static_cast<std::size_t>(std::llround(std::max(0.0, preds(i, 0))));
    } else {
      for (std::size_t k = 1; k < preds.cols; ++k) {
        if (preds(i, k) > preds(i, arg)) arg = k;
      }
    }
    const double yd = targets(i, 0);
    if (yd < 0 || yd != std::floor(yd) || yd >= static_cast<double>(c)) {
      fail(ErrorCode::kShapeMismatch, "metrics: class label out of range");
    }
    const auto y = static_cast<std::size_t>(yd);
    if (arg >= c) arg = c - 1;
    if (arg == y) {
      ++correct;
      tp[y] += 1;
    } else {
      fp[arg] += 1;
      fn[y] += 1;
    }
  }
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double p = tp[k] + fp[k] > 0 ? tp[k] / (tp[k] + fp[k]) : 0.0;
    const double r = tp[k] + fn[k] > 0 ? tp[k] / (tp[k] + fn[k]) : 0.0;
    p_sum += p;
    r_sum += r;
    f_sum += p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  const double cd = static_cast<double>(c);
  for (const std::string& m : task.metrics) {
    if (m == "accuracy") out.values[m] = static_cast<double>(correct) / static_cast<double>(n);
    else if (m == "precision") out.values[m] = p_sum / cd;
    else if (m == "recall") out.values[m] = r_sum / cd;
    else if (m == "f1") out.values[m] = f_sum / cd;
    else fail(ErrorCode::kInvalidSpec, "metric '" + m + "' does not apply to classification");
  }
  return out;
}

MetricSet compute_metrics(const std::vector<double>& preds, const std::vector<double>& targets, const TaskSpec& task) {
  RealMatrix p{preds.size(), 1, preds};
  RealMatrix t{targets.size(), 1, targets};
  return compute_metrics(p, t, task);
}

bool metric_better(const std::string& metric, double a, double b) {
  return metric_direction(metric) == MetricDirection::kLowerBetter ? a < b : a > b;
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,train_loss,val_metric,elapsed_s\n";
  char buf[128];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.6f\n", r.epoch, r.train_loss, r.val_metric, r.elapsed_s);
    out << buf;
  }
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write history '" + path + "'");
  write_history_csv(history, out);
}

SplitView split_view(const Dataset& d, Split s) {
  SplitView v;
  for (std::size_t gi = 0; gi < d.graphs.size(); ++gi) {
    if (d.splits[gi] == s) {
      v.graphs.push_back(gi);
    } else if (d.task.level == TaskLevel::kNode && d.splits[gi] == Split::kMasked) {
      const auto& tags = d.node_splits[gi];
      if (std::find(tags.begin(), tags.end(), s) != tags.end()) v.graphs.push_back(gi);
    }
  }
  return v;
}

std::optional<std::pair<RealMatrix, RealMatrix>> predict_split(const Model& model, const Dataset& d,
                                                                const std::vector<PreparedGraph>& prepared, Split s,
                                                                std::size_t batch_size) {
  const SplitView view = split_view(d, s);
  if (view.graphs.empty()) return std::nullopt;
  nn::ForwardContext ctx;
  RealMatrix preds, targets;
  preds.cols = model.task().output_dim();
  targets.cols = target_width(d.task);
  for (std::size_t lo = 0; lo < view.graphs.size(); lo += batch_size) {
    const std::vector<std::size_t> ids(view.graphs.begin() + lo,
                                       view.graphs.begin() + std::min(view.graphs.size(), lo + batch_size));
    const GraphBatch batch = model.batch(pointers(prepared, ids));
    const Selection sel = select(d, ids, batch, s);
    const ad::Tensor out = model.forward(batch, ctx);
    for (std::size_t r : sel.rows) append_row(preds, &out.values()[r * out.cols()], out.cols());
    targets.data.insert(targets.data.end(), sel.targets.data.begin(), sel.targets.data.end());
    targets.rows += sel.targets.rows;
  }
  if (targets.rows == 0) return std::nullopt;
  return std::make_pair(std::move(preds), std::move(targets));
}

std::optional<MetricSet> evaluate(const Model& model, const Dataset& d, const std::vector<PreparedGraph>& prepared,
                                  Split s, std::size_t batch_size) {
  auto pt = predict_split(model, d, prepared, s, batch_size);
  if (!pt) return std::nullopt;
  try {
    return compute_metrics(pt->first, pt->second, d.task);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateTarget || d.task.primary_metric() == "r2") throw;
    // Constant targets in a small split: report what is defined.
    TaskSpec reduced = d.task;
    reduced.metrics.erase(std::remove(reduced.metrics.begin(), reduced.metrics.end(), "r2"), reduced.metrics.end());
    return compute_metrics(pt->first, pt->second, reduced);
  }
}

TrainResult train(Model& model, const Dataset& d, const std::vector<PreparedGraph>& prepared, const TrainConfig& cfg) {
  cfg.validate();
  if (prepared.size() != d.graphs.size()) fail(ErrorCode::kShapeMismatch, "train: prepared graphs do not match dataset");
  SplitView train_view = split_view(d, Split::kTrain);
  if (train_view.graphs.empty()) fail(ErrorCode::kSplitError, "train: the train split is empty");
  if (split_view(d, Split::kVal).graphs.empty()) fail(ErrorCode::kSplitError, "train: the val split is empty");

  const std::string primary = d.task.primary_metric();
  std::mt19937_64 rng(cfg.seed);
  nn::ForwardContext train_ctx{true, model.config().dropout, &rng};
  ad::AdamState adam;
  const ad::AdamHyper hyper = cfg.adam();
  TrainResult result;
  std::vector<std::vector<double>> best_values;
  const auto start = Clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    std::shuffle(train_view.graphs.begin(), train_view.graphs.end(), rng);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t lo = 0; lo < train_view.graphs.size(); lo += cfg.batch_size) {
      const std::vector<std::size_t> ids(train_view.graphs.begin() + lo,
                                         train_view.graphs.begin() + std::min(train_view.graphs.size(), lo + cfg.batch_size));
      const GraphBatch batch = model.batch(pointers(prepared, ids));
      const Selection sel = select(d, ids, batch, Split::kTrain);
      if (sel.rows.empty()) continue;
      const ad::Tensor out = ad::gather_rows(model.forward(batch, train_ctx), sel.rows);
      const ad::Tensor l = loss(out, ad::Tensor::constant(sel.targets), d.task);
      check_finite(l.item(), "training loss");
      const ad::Gradients grads = ad::backward(l);
      ad::adam_step(model.params(), grads, adam, hyper);
      loss_sum += l.item() * static_cast<double>(sel.rows.size());
      weight_sum += static_cast<double>(sel.rows.size());
    }
    const MetricSet val = *evaluate(model, d, prepared, Split::kVal, cfg.batch_size);
    const double v = val.get(primary);
    check_finite(v, "validation " + primary);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weight_sum > 0 ? loss_sum / weight_sum : 0.0;
    rec.val_metric = v;
    rec.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
    result.history.push_back(rec);

    if (epoch == 1 || metric_better(primary, v, result.best_val)) {
      result.best_epoch = epoch;
      result.best_val = v;
      result.best_val_metrics = val;
      best_values.clear();
      for (const auto& [name, t] : model.params().entries()) best_values.push_back(t.values());
    }
    if (epoch - result.best_epoch > cfg.patience) break;
  }

  std::size_t k = 0;
  for (const auto& [name, t] : model.params().entries()) {
    ad::Tensor handle = t;
    handle.mutable_values() = best_values[k++];
  }
  return result;
}

TrainResult train(Model& model, const Dataset& d, const TrainConfig& cfg, const pe::PeCache* cache) {
  const auto prepared = model.prepare_all(d.graphs, cache);
  return train(model, d, prepared, cfg);
}

std::vector<std::uint64_t> default_seeds() { return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}; }

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string format_mean_std(double mean, double std) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.3f±%.3f", mean, std);
  return buf;
}


ProtocolResult run_protocol(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& d,
                            const std::vector<std::uint64_t>& seeds, const ProtocolOptions& options) {
  if (seeds.empty()) fail(ErrorCode::kConfigError, "protocol.seeds must not be empty");
  train_cfg.validate();
  const FeatureDims dims = feature_dims(d);
  const Model proto(model_cfg, dims, d.task, 0);
  const std::vector<PreparedGraph> prepared = proto.prepare_all(d.graphs, options.cache, options.jobs);

  ProtocolResult result;
  result.per_seed.resize(seeds.size());
  auto run_one = [&](std::size_t k) {
    SeedOutcome& o = result.per_seed[k];
    o.seed = seeds[k];
    Model model(model_cfg, dims, d.task, seeds[k]);
    TrainConfig tc = train_cfg;
    tc.seed = seeds[k];
    o.train = train(model, d, prepared, tc);
    for (Split s : {Split::kTestId, Split::kTestOod}) {
      if (auto m = evaluate(model, d, prepared, s, tc.batch_size)) o.splits[std::string(split_name(s))] = std::move(*m);
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, seeds.size()));
  if (jobs == 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) run_one(k);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (;;) {
        std::size_t k;
        {
          std::lock_guard lock(mu);
          if (next >= seeds.size() || first_error) return;
          k = next++;
        }
        try {
          run_one(k);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (const char* split : {"test_id", "test_ood"}) {
    for (const std::string& metric : d.task.metrics) {
      std::vector<double> vals;
      std::vector<std::uint64_t> used;
      for (const SeedOutcome& o : result.per_seed) {
        auto it = o.splits.find(split);
        if (it == o.splits.end() || !it->second.has(metric)) continue;
        vals.push_back(it->second.get(metric));
        used.push_back(o.seed);
      }
      if (vals.empty()) continue;
      const auto [mean, sd] = mean_std(vals);
      result.records.push_back({options.method, options.task, options.dataset, split, metric, mean, sd, used});
    }
  }
  return result;
}

std::string results_to_json(const std::vector<ResultRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ResultRecord& r : records) {
    nlohmann::json j;
    j["method"] = r.method;
    j["task"] = r.task;
    if (!r.dataset.empty()) j["dataset"] = r.dataset;
    j["split"] = r.split;
    j["metric"] = r.metric;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["seeds"] = r.seeds;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<ResultRecord> results_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParseError, std::string("results: ") + e.what());
  }
  if (!arr.is_array()) fail(ErrorCode::kSchemaError, "results: expected a JSON array of records");
  std::vector<ResultRecord> out;
  for (const auto& j : arr) {
    ResultRecord r;
    try {
      r.method = j.at("method").get<std::string>();
      r.task = j.at("task").get<std::string>();
      r.dataset = j.value("dataset", std::string());
      r.split = j.at("split").get<std::string>();
      r.metric = j.at("metric").get<std::string>();
      r.mean = j.at("mean").get<double>();
      r.std = j.at("std").get<double>();
      r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kSchemaError, std::string("results record: ") + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dgrl
