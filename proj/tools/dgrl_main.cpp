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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dgrl/config.hpp"
#include "dgrl/dataset_io.hpp"
#include "dgrl/error.hpp"
#include "dgrl/model.hpp"
#include "dgrl/report.hpp"
#include "dgrl/training.hpp"
#include "dgrl/tuner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  std::string format = "markdown";
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) dgrl::fail(dgrl::ErrorCode::kIoError, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) dgrl::fail(dgrl::ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
}

dgrl::RunConfig load_config(const Options& o) {
  dgrl::RunConfig cfg = dgrl::parse_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  fs::create_directories(cfg.output_dir);
  write_file(fs::path(cfg.output_dir) / "config.json", dgrl::echo_run_config(cfg));
  return cfg;
}

std::unique_ptr<dgrl::pe::PeCache> cache_from_env() {
  const char* dir = std::getenv("DGRL_CACHE");
  if (!dir || !*dir) return nullptr;
  return std::make_unique<dgrl::pe::PeCache>(dir);
}

std::string metrics_json(const dgrl::MetricSet& m) {
  json j = json::object();
  for (const auto& [k, v] : m.values) j[k] = v;
  return j.dump();
}

void print_warnings(const dgrl::Model& model) {
  for (const std::string& w : model.warnings()) std::cerr << "warning: " << w << "\n";
}

int cmd_gen(const Options& o) {
  dgrl::SyntheticSpec spec;
  std::uint64_t seed = 0;
  std::string out_dir = o.out.empty() ? "dgrl_out" : o.out;
  if (!o.config.empty()) {
    const dgrl::RunConfig cfg = dgrl::parse_run_config(o.config);
    if (!cfg.synthetic) dgrl::fail(dgrl::ErrorCode::kConfigError, "synthetic: gen needs a synthetic spec");
    spec = *cfg.synthetic;
    seed = cfg.synthetic_seed;
    if (o.out.empty()) out_dir = cfg.output_dir;
  }
  if (o.seed) seed = *o.seed;
  const dgrl::Dataset d = dgrl::generate_synthetic(spec, seed);
  fs::create_directories(out_dir);
  dgrl::save_dataset(d, (fs::path(out_dir) / "dataset.jsonl").string());
  std::cout << "wrote " << d.graphs.size() << " graphs to " << (fs::path(out_dir) / "dataset.jsonl").string() << "\n";
  return 0;
}

int cmd_pe(const Options& o) {
  const dgrl::RunConfig cfg = load_config(o);
  const dgrl::Dataset d = dgrl::materialize_dataset(cfg);
  const char* env = std::getenv("DGRL_CACHE");
  const std::string dir = env && *env ? env : (fs::path(cfg.output_dir) / "pe_cache").string();
  const dgrl::pe::PeCache cache(dir);
  const std::size_t cap = cfg.model.pe_node_cap;
  for (const dgrl::DirectedGraph& g : d.graphs) {
    if (g.num_nodes() > cap) {
      dgrl::fail(dgrl::ErrorCode::kNodeCapExceeded, "graph with " + std::to_string(g.num_nodes()) +
                                                        " nodes exceeds pe_node_cap " + std::to_string(cap));
    }
    (void)dgrl::pe::cached_pe_basis(g, cfg.model.pe.q, cfg.model.pe.d, &cache);
  }
  std::cout << "cached spectra for " << d.graphs.size() << " graphs in " << dir << "\n";
  dgrl::write_manifest(cfg.output_dir, cfg, "pe", {"config.json"});
  return 0;
}

int cmd_train(const Options& o) {
  const dgrl::RunConfig cfg = load_config(o);
  const dgrl::Dataset d = dgrl::materialize_dataset(cfg);
  const auto cache = cache_from_env();
  dgrl::Model model = dgrl::build_model(cfg.model, dgrl::feature_dims(d), d.task, cfg.train.seed);
  print_warnings(model);
  const auto prepared = model.prepare_all(d.graphs, cache.get(), o.jobs);
  const dgrl::TrainResult r = dgrl::train(model, d, prepared, cfg.train);
  const fs::path out(cfg.output_dir);
  dgrl::write_history_csv(r.history, (out / "history.csv").string());
  dgrl::save_checkpoint(dgrl::make_checkpoint(model, dgrl::echo_run_config(cfg), std::to_string(cfg.train.seed)),
                        (out / "checkpoint.bin").string());
  json metrics = json::object();
  metrics["best_epoch"] = r.best_epoch;
  metrics["val"] = json::parse(metrics_json(r.best_val_metrics));
  for (dgrl::Split s : {dgrl::Split::kTestId, dgrl::Split::kTestOod}) {
    if (auto m = dgrl::evaluate(model, d, prepared, s, cfg.train.batch_size)) {
      metrics[std::string(dgrl::split_name(s))] = json::parse(metrics_json(*m));
    }
  }
  write_file(out / "metrics.json", metrics.dump(2) + "\n");
  dgrl::write_manifest(cfg.output_dir, cfg, "train", {"config.json", "history.csv", "checkpoint.bin", "metrics.json"});
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

int cmd_tune(const Options& o) {
  const dgrl::RunConfig cfg = load_config(o);
  const dgrl::Dataset d = dgrl::materialize_dataset(cfg);
  const auto cache = cache_from_env();
  const dgrl::SearchSpace space = dgrl::run_search_space(cfg);
  const std::string primary = d.task.primary_metric();
  dgrl::TpeOptions topt;
  topt.minimize = dgrl::metric_direction(primary) == dgrl::MetricDirection::kLowerBetter;
  std::ofstream log(fs::path(cfg.output_dir) / "trials.jsonl");
  if (!log) dgrl::fail(dgrl::ErrorCode::kIoError, "cannot write trials.jsonl");

  auto objective = [&](const dgrl::TrialConfig& trial) {
    dgrl::ModelConfig mc = cfg.model;
    dgrl::TrainConfig tc = cfg.train;
    dgrl::apply_trial(trial, mc, tc);
    dgrl::Model model = dgrl::build_model(mc, dgrl::feature_dims(d), d.task, tc.seed);
    const auto prepared = model.prepare_all(d.graphs, cache.get(), o.jobs);
    return dgrl::train(model, d, prepared, tc).best_val;
  };
  auto on_trial = [&](const dgrl::Trial& t) {
    log << dgrl::trial_to_json_line(t) << "\n" << std::flush;
    std::cerr << "trial " << t.id << ": "
              << (t.objective ? std::to_string(*t.objective) : "failed (" + t.error + ")") << "\n";
  };
  const dgrl::TuneResult r = dgrl::tune(space, objective, cfg.tune.budget, cfg.tune.seed, topt, cfg.tune.sampler, on_trial);
  log.close();
  json best = json::parse(dgrl::trial_to_json_line(r.best));
  write_file(fs::path(cfg.output_dir) / "best.json", best.dump(2) + "\n");
  dgrl::write_manifest(cfg.output_dir, cfg, "tune", {"config.json", "trials.jsonl", "best.json"});
  std::cout << best.dump(2) << "\n";
  return 0;
}

int cmd_protocol(const Options& o) {
  const dgrl::RunConfig cfg = load_config(o);
  const dgrl::Dataset d = dgrl::materialize_dataset(cfg);
  const auto cache = cache_from_env();
  dgrl::ProtocolOptions popt;
  popt.method = cfg.method;
  popt.task = cfg.task;
  popt.dataset = cfg.dataset_path ? fs::path(*cfg.dataset_path).stem().string() : "synthetic";
  popt.jobs = o.jobs;
  popt.cache = cache.get();
  {
    const dgrl::Model probe = dgrl::build_model(cfg.model, dgrl::feature_dims(d), d.task, 0);
    print_warnings(probe);
  }
  const dgrl::ProtocolResult r = dgrl::run_protocol(cfg.model, cfg.train, d, cfg.seeds, popt);
  write_file(fs::path(cfg.output_dir) / "results.json", dgrl::results_to_json(r.records));
  std::ostringstream summary;
  summary << "| method | task | split | metric | value |\n|---|---|---|---|---|\n";
  for (const dgrl::ResultRecord& rec : r.records) {
    summary << "| " << rec.method << " | " << rec.task << " | " << rec.split << " | " << rec.metric << " | "
            << dgrl::format_mean_std(rec.mean, rec.std) << " |\n";
  }
  write_file(fs::path(cfg.output_dir) / "summary.md", summary.str());
  dgrl::write_manifest(cfg.output_dir, cfg, "protocol", {"config.json", "results.json", "summary.md"});
  std::cout << summary.str();
  return 0;
}

int cmd_rank(const Options& o) {
  std::vector<dgrl::ResultRecord> records;
  for (const std::string& path : o.inputs) {
    auto part = dgrl::results_from_json(read_file(path));
    records.insert(records.end(), part.begin(), part.end());
  }
  const dgrl::TableFormat fmt = dgrl::parse_table_format(o.format);
  std::ostringstream text;
  for (const char* split : {"test_id", "test_ood"}) {
    const dgrl::ResultsTable table = dgrl::table_from_records(records, split);
    if (table.empty()) continue;
    if (fmt == dgrl::TableFormat::kMarkdown) text << "## " << split << " results\n\n";
    text << dgrl::render(table, fmt) << "\n";
    if (fmt == dgrl::TableFormat::kMarkdown) text << "## " << split << " average rank\n\n";
    text << dgrl::render_ranks(dgrl::rank_table(table), fmt) << "\n";
  }
  if (o.out.empty()) {
    std::cout << text.str();
  } else {
    const fs::path parent = fs::path(o.out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_file(o.out, text.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgrl: directed graph representation learning toolbox"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "run config (JSON)");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "parallel workers across graphs, seeds or trials")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, false);
  gen->add_option("--seed", o.seed, "generator seed");
  auto* pe = app.add_subcommand("pe", "precompute and cache magnetic Laplacian spectra");
  add_common(pe, true);
  auto* train = app.add_subcommand("train", "train one configuration");
  add_common(train, true);
  auto* tune = app.add_subcommand("tune", "hyperparameter search");
  add_common(tune, true);
  auto* protocol = app.add_subcommand("protocol", "train and test over several seeds");
  add_common(protocol, true);
  auto* rank = app.add_subcommand("rank", "aggregate results files into rank tables");
  rank->add_option("results", o.inputs, "results.json files")->required()->check(CLI::ExistingFile);
  rank->add_option("--format", o.format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  rank->add_option("--out", o.out, "write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*pe) return cmd_pe(o);
    if (*train) return cmd_train(o);
    if (*tune) return cmd_tune(o);
    if (*protocol) return cmd_protocol(o);
    if (*rank) return cmd_rank(o);
  } catch (const dgrl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dgrl::exit_status_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
