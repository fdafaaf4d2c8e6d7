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
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace dgrl {

using ParamValue = std::variant<double, std::string>;
using TrialConfig = std::map<std::string, ParamValue>;

enum class DimKind { kCategorical, kLogUniform, kIntUniform, kUniform };

struct Dimension {
  std::string name;
  DimKind kind = DimKind::kUniform;
  std::vector<ParamValue> values;  // categorical only
  double lo = 0.0;
  double hi = 1.0;

  static Dimension categorical(std::string name, std::vector<ParamValue> values);
  static Dimension log_uniform(std::string name, double lo, double hi);
  static Dimension int_uniform(std::string name, double lo, double hi);
  static Dimension uniform(std::string name, double lo, double hi);

  /// True when v is a legal value of this dimension.
  bool contains(const ParamValue& v) const;
};

class SearchSpace {
 public:
  SearchSpace() = default;

  /// Adds or replaces a dimension by name. Throws ConfigError on bad bounds.
  SearchSpace& set(Dimension d);
  const std::vector<Dimension>& dims() const { return dims_; }
  const Dimension* find(const std::string& name) const;
  bool contains(const TrialConfig& c) const;

 private:
  std::vector<Dimension> dims_;
};

/// Default space for a backbone name ("gps_t" uses the narrower transformer
/// ranges, "magnet" the spectral lr range); q is added when pe_active.
SearchSpace default_search_space(const std::string& backbone, bool pe_active);

enum class TrialStatus { kOk, kFailed };

struct Trial {
  std::size_t id = 0;
  TrialConfig config;
  std::optional<double> objective;
  TrialStatus status = TrialStatus::kFailed;
  double wall_s = 0.0;
  std::string error;
};

struct TpeOptions {
  double gamma = 0.25;
  std::size_t n_candidates = 24;
  std::size_t warmup = 10;
  bool minimize = true;
};

TrialConfig sample_uniform(const SearchSpace& space, std::mt19937_64& rng);

/// Independent-dimension TPE; falls back to sample_uniform (same rng stream)
/// while fewer than options.warmup trials succeeded.
TrialConfig tpe_suggest(const SearchSpace& space, const std::vector<Trial>& history, std::mt19937_64& rng,
                        const TpeOptions& options = {});

struct TuneResult {
  Trial best;
  std::vector<Trial> history;
};

enum class Sampler { kTpe, kRandom };

using ObjectiveFn = std::function<double(const TrialConfig&)>;

/// Sequential search. Exceptions from the objective mark a trial failed.
/// Throws AllTrialsFailed when no trial succeeds.
TuneResult tune(const SearchSpace& space, const ObjectiveFn& objective, std::size_t budget = 100,
                std::uint64_t seed = 123, const TpeOptions& options = {}, Sampler sampler = Sampler::kTpe,
                const std::function<void(const Trial&)>& on_trial = {});

double as_number(const ParamValue& v);
std::string value_to_string(const ParamValue& v);

/// One JSON object per line: {trial_id, config, objective, status, wall_s}.
std::string trial_to_json_line(const Trial& t);
void write_trial_log(const std::vector<Trial>& trials, std::ostream& out);

}  // namespace dgrl
