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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dgrl/model.hpp"
#include "dgrl/synthetic.hpp"
#include "dgrl/training.hpp"
#include "dgrl/tuner.hpp"

namespace dgrl {

struct TuneSettings {
  std::size_t budget = 100;
  std::uint64_t seed = 123;
  Sampler sampler = Sampler::kTpe;
  /// Per-task overrides of the default space, keyed by dimension name.
  nlohmann::json space = nlohmann::json::object();

  bool operator==(const TuneSettings&) const = default;
};

struct RunConfig {
  /// Exactly one of dataset_path / synthetic is set.
  std::optional<std::string> dataset_path;
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t synthetic_seed = 0;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = default_seeds();
  std::string method;  // defaults to a name derived from the model
  std::string task;    // defaults to the dataset stem or the label rule
  TuneSettings tune;
  std::string output_dir = "dgrl_out";

  bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a run config. Relative dataset paths resolve against
/// base_dir. Throws ConfigError naming the offending field.
RunConfig parse_run_config_json(const std::string& text, const std::string& base_dir = ".");
RunConfig parse_run_config(const std::string& path);

/// Full config with defaults filled in, as JSON text.
std::string echo_run_config(const RunConfig& cfg);

/// e.g. "BI-GIN+NPE", "DI-GAT", "MagNet".
std::string method_name(const ModelConfig& m);

/// Loads the dataset file or generates the synthetic one.
Dataset materialize_dataset(const RunConfig& cfg);

/// Largest graph the synthetic spec can produce.
std::size_t synthetic_max_nodes(const SyntheticSpec& spec);

/// Default space with the config's overrides applied.
SearchSpace run_search_space(const RunConfig& cfg);
/// Copies a sampled trial config into model/train settings. hidden_dim is
/// rounded up to a multiple of heads for attention backbones.
void apply_trial(const TrialConfig& trial, ModelConfig& model, TrainConfig& train);

std::string fnv1a_hex(const std::string& bytes);

/// Writes manifest.json into dir: config echo, seeds, command and a hash of
/// every listed artifact.
void write_manifest(const std::string& dir, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& artifacts);

}  // namespace dgrl
