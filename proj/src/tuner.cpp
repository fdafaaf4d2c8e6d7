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

#include "dgrl/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "json.hpp"

#include "dgrl/error.hpp"

namespace dgrl {

Dimension Dimension::categorical(std::string name, std::vector<ParamValue> values) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimKind::kCategorical;
  d.values = std::move(values);
  return d;
}

Dimension Dimension::log_uniform(std::string name, double lo, double hi) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimKind::kLogUniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Dimension Dimension::int_uniform(std::string name, double lo, double hi) {
  Dimension d = log_uniform(std::move(name), lo, hi);
  d.kind = DimKind::kIntUniform;
  return d;
}

Dimension Dimension::uniform(std::string name, double lo, double hi) {
  Dimension d = log_uniform(std::move(name), lo, hi);
  d.kind = DimKind::kUniform;
  return d;
}

bool Dimension::contains(const ParamValue& v) const {
  if (kind == DimKind::kCategorical) return std::find(values.begin(), values.end(), v) != values.end();
  if (!std::holds_alternative<double>(v)) return false;
  const double x = std::get<double>(v);
  if (!(x >= lo && x <= hi)) return false;
  return kind != DimKind::kIntUniform || x == std::round(x);
}

SearchSpace& SearchSpace::set(Dimension d) {
  if (d.name.empty()) fail(ErrorCode::kConfigError, "search space: dimension without a name");
  if (d.kind == DimKind::kCategorical) {
    if (d.values.empty()) fail(ErrorCode::kConfigError, "search space: '" + d.name + "' has no categories");
  } else {
    if (!(d.lo < d.hi)) fail(ErrorCode::kConfigError, "search space: '" + d.name + "' needs lo < hi");
    if (d.kind == DimKind::kLogUniform && !(d.lo > 0.0)) {
      fail(ErrorCode::kConfigError, "search space: log-uniform '" + d.name + "' needs lo > 0");
    }
    if (d.kind == DimKind::kIntUniform && (d.lo != std::round(d.lo) || d.hi != std::round(d.hi))) {
      fail(ErrorCode::kConfigError, "search space: int-uniform '" + d.name + "' needs integer bounds");
    }
  }
  for (Dimension& existing : dims_) {
    if (existing.name == d.name) {
      existing = std::move(d);
      return *this;
    }
  }
  dims_.push_back(std::move(d));
  return *this;
}

const Dimension* SearchSpace::find(const std::string& name) const {
  for (const Dimension& d : dims_) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

bool SearchSpace::contains(const TrialConfig& c) const {
  if (c.size() != dims_.size()) return false;
  for (const Dimension& d : dims_) {
    auto it = c.find(d.name);
    if (it == c.end() || !d.contains(it->second)) return false;
  }
  return true;
}

SearchSpace default_search_space(const std::string& backbone, bool pe_active) {
  const bool gps = backbone == "gps_t";
  SearchSpace s;
  if (gps) {
    s.set(Dimension::categorical("batch_size", {64.0, 128.0, 256.0}));
  } else {
    s.set(Dimension::categorical("batch_size", {64.0, 128.0, 256.0, 512.0, 1024.0}));
  }
  s.set(Dimension::log_uniform("lr", backbone == "magnet" ? 5e-4 : 1e-4, 1e-2));
  s.set(Dimension::categorical("dropout", {0.0, 0.1, 0.2, 0.3}));
  s.set(Dimension::int_uniform("hidden_dim", 96, gps ? 288 : 336));
  s.set(Dimension::int_uniform("num_layers", 3, gps ? 6 : 8));
  s.set(Dimension::int_uniform("mlp_layers", 2, 5));
  if (pe_active) s.set(Dimension::categorical("q", {0.0, 0.1}));
  return s;
}

namespace {

// Numeric dims are modelled in an internal coordinate: log10 for log-uniform.
double to_internal(const Dimension& d, double x) { return d.kind == DimKind::kLogUniform ? std::log10(x) : x; }

double internal_lo(const Dimension& d) { return to_internal(d, d.lo); }
double internal_hi(const Dimension& d) { return to_internal(d, d.hi); }

double from_internal(const Dimension& d, double y) {
  double x = d.kind == DimKind::kLogUniform ? std::pow(10.0, y) : y;
  if (d.kind == DimKind::kIntUniform) x = std::round(x);
  return std::clamp(x, d.lo, d.hi);
}

ParamValue sample_dim(const Dimension& d, std::mt19937_64& rng) {
  if (d.kind == DimKind::kCategorical) {
    std::uniform_int_distribution<std::size_t> pick(0, d.values.size() - 1);
    return d.values[pick(rng)];
  }
  if (d.kind == DimKind::kIntUniform) {
    std::uniform_int_distribution<long long> pick(static_cast<long long>(d.lo), static_cast<long long>(d.hi));
    return static_cast<double>(pick(rng));
  }
  std::uniform_real_distribution<double> u(internal_lo(d), internal_hi(d));
  return from_internal(d, u(rng));
}

/// Parzen estimator of one dimension over a set of observations.
struct Parzen {
  const Dimension* dim = nullptr;
  std::vector<double> centers;   // numeric
  std::vector<double> weights;   // categorical probabilities
  double bandwidth = 1.0;

  Parzen(const Dimension& d, const std::vector<const Trial*>& set) : dim(&d) {
    if (d.kind == DimKind::kCategorical) {
      weights.assign(d.values.size(), 1.0);
      for (const Trial* t : set) {
        auto it = std::find(d.values.begin(), d.values.end(), t->config.at(d.name));
        if (it != d.values.end()) weights[static_cast<std::size_t>(it - d.values.begin())] += 1.0;
      }
      const double total = static_cast<double>(set.size() + d.values.size());
      for (double& w : weights) w /= total;
      return;
    }
    for (const Trial* t : set) centers.push_back(to_internal(d, as_number(t->config.at(d.name))));
    const double range = internal_hi(d) - internal_lo(d);
    bandwidth = centers.empty() ? range : std::max(range / std::sqrt(static_cast<double>(centers.size())), 1e-3 * range);
  }

  double log_density(const ParamValue& v) const {
    if (dim->kind == DimKind::kCategorical) {
      auto it = std::find(dim->values.begin(), dim->values.end(), v);
      return std::log(weights[static_cast<std::size_t>(it - dim->values.begin())]);
    }
    const double y = to_internal(*dim, as_number(v));
    if (centers.empty()) return -std::log(internal_hi(*dim) - internal_lo(*dim));
    const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
    double acc = 0.0;
    for (double c : centers) {
      const double z = (y - c) / bandwidth;
      acc += norm * std::exp(-0.5 * z * z);
    }
    acc /= static_cast<double>(centers.size());
    return std::log(std::max(acc, 1e-300));
  }

  ParamValue sample(std::mt19937_64& rng) const {
    if (dim->kind == DimKind::kCategorical) {
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      return dim->values[pick(rng)];
    }
    if (centers.empty()) return sample_dim(*dim, rng);
    std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
    std::normal_distribution<double> noise(0.0, bandwidth);
    const double lo = internal_lo(*dim);
    const double hi = internal_hi(*dim);
    const double c = centers[pick(rng)];
    double y = c + noise(rng);
    for (int attempt = 0; attempt < 16 && (y < lo || y > hi); ++attempt) y = c + noise(rng);
    return from_internal(*dim, std::clamp(y, lo, hi));
  }
};

}  // namespace

double as_number(const ParamValue& v) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  fail(ErrorCode::kConfigError, "expected a numeric value, got '" + std::get<std::string>(v) + "'");
}

std::string value_to_string(const ParamValue& v) {
  if (const double* d = std::get_if<double>(&v)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", *d);
    return buf;
  }
  return std::get<std::string>(v);
}

TrialConfig sample_uniform(const SearchSpace& space, std::mt19937_64& rng) {
  TrialConfig c;
  for (const Dimension& d : space.dims()) c[d.name] = sample_dim(d, rng);
  return c;
}

TrialConfig tpe_suggest(const SearchSpace& space, const std::vector<Trial>& history, std::mt19937_64& rng,
                        const TpeOptions& options) {
  std::vector<const Trial*> ok;
  for (const Trial& t : history) {
    if (t.status == TrialStatus::kOk && t.objective && space.contains(t.config)) ok.push_back(&t);
  }
  if (ok.size() < std::max<std::size_t>(options.warmup, 2)) return sample_uniform(space, rng);

  std::stable_sort(ok.begin(), ok.end(), [&](const Trial* a, const Trial* b) {
    return options.minimize ? *a->objective < *b->objective : *a->objective > *b->objective;
  });
  const auto n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(ok.size()))), 1, ok.size() - 1);
  const std::vector<const Trial*> good(ok.begin(), ok.begin() + static_cast<std::ptrdiff_t>(n_good));
  const std::vector<const Trial*> bad(ok.begin() + static_cast<std::ptrdiff_t>(n_good), ok.end());

  std::vector<Parzen> l, g;
  for (const Dimension& d : space.dims()) {
    l.emplace_back(d, good);
    g.emplace_back(d, bad);
  }
  TrialConfig best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < std::max<std::size_t>(1, options.n_candidates); ++k) {
    TrialConfig cand;
    double score = 0.0;
    for (std::size_t i = 0; i < space.dims().size(); ++i) {
      ParamValue v = l[i].sample(rng);
      score += l[i].log_density(v) - g[i].log_density(v);
      cand[space.dims()[i].name] = std::move(v);
    }
    if (k == 0 || score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

TuneResult tune(const SearchSpace& space, const ObjectiveFn& objective, std::size_t budget, std::uint64_t seed,
                const TpeOptions& options, Sampler sampler, const std::function<void(const Trial&)>& on_trial) {
  if (budget < 1) fail(ErrorCode::kConfigError, "tune.budget must be >= 1");
  std::mt19937_64 rng(seed);
  TuneResult result;
  for (std::size_t id = 0; id < budget; ++id) {
    Trial t;
    t.id = id;
    t.config = sampler == Sampler::kTpe ? tpe_suggest(space, result.history, rng, options) : sample_uniform(space, rng);
    const auto start = std::chrono::steady_clock::now();
    try {
      const double v = objective(t.config);
      if (!std::isfinite(v)) throw Error(ErrorCode::kConvergenceFailure, "objective is not finite");
      t.objective = v;
      t.status = TrialStatus::kOk;
    } catch (const std::exception& e) {
      t.status = TrialStatus::kFailed;
      t.error = e.what();
    }
    t.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_trial) on_trial(t);
    result.history.push_back(std::move(t));
  }
  const Trial* best = nullptr;
  for (const Trial& t : result.history) {
    if (t.status != TrialStatus::kOk) continue;
    if (!best || (options.minimize ? *t.objective < *best->objective : *t.objective > *best->objective)) best = &t;
  }
  if (!best) fail(ErrorCode::kAllTrialsFailed, "all " + std::to_string(budget) + " trials failed");
  result.best = *best;
  return result;
}

std::string trial_to_json_line(const Trial& t) {
  nlohmann::json j;
  j["trial_id"] = t.id;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : t.config) {
    if (const double* d = std::get_if<double>(&v)) cfg[k] = *d;
    else cfg[k] = std::get<std::string>(v);
  }
  j["config"] = std::move(cfg);
  j["objective"] = t.objective ? nlohmann::json(*t.objective) : nlohmann::json(nullptr);
  j["status"] = t.status == TrialStatus::kOk ? "ok" : "failed";
  j["wall_s"] = t.wall_s;
  if (!t.error.empty()) j["error"] = t.error;
  return j.dump();
}

void write_trial_log(const std::vector<Trial>& trials, std::ostream& out) {
  for (const Trial& t : trials) out << trial_to_json_line(t) << "\n";
}

}  // namespace dgrl
