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

#include "dgrl/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dgrl/dataset_io.hpp"
#include "dgrl/error.hpp"

namespace dgrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::kConfigError, field + ": " + what);
}

/// Typed access to one JSON object with unknown-key detection.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) fail(ErrorCode::kConfigError, "unknown key '" + field(k) + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(field(key), "has the wrong type");
    }
  }

  void get_size(const char* key, std::size_t& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) config_error(field(key), "must be a non-negative integer");
    out = v.get<std::size_t>();
  }

  void get_u64(const char* key, std::uint64_t& out) const {
    std::size_t v = out;
    get_size(key, v);
    out = v;
  }

  void get_number(const char* key, double& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_number()) config_error(field(key), "must be a number");
    out = j_.at(key).get<double>();
  }

  /// Runs a string-to-enum conversion and rewrites its error as a ConfigError.
  template <typename F>
  void get_enum(const char* key, F&& convert) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) config_error(field(key), "must be a string");
    try {
      convert(j_.at(key).get<std::string>());
    } catch (const Error& e) {
      config_error(field(key), e.what());
    }
  }

 private:
  const json& j_;
  std::string path_;
};

Dimension parse_dimension(const std::string& name, const json& spec, const std::string& field) {
  if (!spec.is_object() || spec.size() != 1) {
    config_error(field, "expected one of {\"choice\": [...]}, {\"log\": [lo, hi]}, {\"int\": [lo, hi]}, "
                        "{\"uniform\": [lo, hi]}");
  }
  const auto& [kind, arg] = *spec.items().begin();
  try {
    if (kind == "choice") {
      if (!arg.is_array() || arg.empty()) config_error(field + ".choice", "must be a non-empty array");
      std::vector<ParamValue> values;
      for (const json& v : arg) {
        if (v.is_number()) values.emplace_back(v.get<double>());
        else if (v.is_string()) values.emplace_back(v.get<std::string>());
        else config_error(field + ".choice", "values must be numbers or strings");
      }
      return Dimension::categorical(name, std::move(values));
    }
    if (!arg.is_array() || arg.size() != 2 || !arg[0].is_number() || !arg[1].is_number()) {
      config_error(field + "." + kind, "must be [lo, hi]");
    }
    const double lo = arg[0].get<double>();
    const double hi = arg[1].get<double>();
    if (kind == "log") return Dimension::log_uniform(name, lo, hi);
    if (kind == "int") return Dimension::int_uniform(name, lo, hi);
    if (kind == "uniform") return Dimension::uniform(name, lo, hi);
  } catch (const json::exception&) {
    config_error(field, "malformed dimension");
  }
  config_error(field, "unknown dimension kind '" + kind + "'");
}

json dimension_to_json(const Dimension& d) {
  switch (d.kind) {
    case DimKind::kCategorical: {
      json arr = json::array();
      for (const ParamValue& v : d.values) {
        if (const double* x = std::get_if<double>(&v)) arr.push_back(*x);
        else arr.push_back(std::get<std::string>(v));
      }
      return {{"choice", arr}};
    }
    case DimKind::kLogUniform: return {{"log", {d.lo, d.hi}}};
    case DimKind::kIntUniform: return {{"int", {d.lo, d.hi}}};
    case DimKind::kUniform: return {{"uniform", {d.lo, d.hi}}};
  }
  return {};
}

void parse_synthetic(const json& j, RunConfig& cfg) {
  Section s(j, "synthetic");
  s.allow({"num_graphs", "min_nodes", "max_nodes", "density", "dag_only", "label_rule", "num_classes", "metrics",
           "val_fraction", "test_fraction", "ood_fraction", "seed"});
  SyntheticSpec spec;
  s.get_size("num_graphs", spec.num_graphs);
  s.get_size("min_nodes", spec.min_nodes);
  s.get_size("max_nodes", spec.max_nodes);
  s.get_number("density", spec.density);
  s.get("dag_only", spec.dag_only);
  s.get_enum("label_rule", [&](const std::string& v) { spec.label_rule = parse_label_rule(v); });
  s.get_size("num_classes", spec.num_classes);
  s.get("metrics", spec.metrics);
  s.get_number("val_fraction", spec.val_fraction);
  s.get_number("test_fraction", spec.test_fraction);
  s.get_number("ood_fraction", spec.ood_fraction);
  s.get_u64("seed", cfg.synthetic_seed);
  if (spec.min_nodes < 1 || spec.min_nodes > spec.max_nodes) {
    config_error("synthetic.min_nodes", "must satisfy 1 <= min_nodes <= max_nodes");
  }
  try {
    (void)synthetic_task(spec);
  } catch (const Error& e) {
    config_error("synthetic", e.what());
  }
  cfg.synthetic = spec;
}

void parse_model(const json& j, RunConfig& cfg) {
  Section s(j, "model");
  s.allow({"backbone", "direction", "combine", "num_layers", "hidden_dim", "dropout", "mlp_layers", "heads",
           "magnet_q", "cheb_order"});
  ModelConfig& m = cfg.model;
  s.get_enum("backbone", [&](const std::string& v) { m.backbone = parse_backbone(v); });
  s.get_enum("direction", [&](const std::string& v) { m.direction.kind = parse_direction(v); });
  if (s.has("combine")) {
    if (m.direction.kind != DirectionKind::kBidirected) {
      config_error("model.combine", "only applies to direction 'bidirected'");
    }
    s.get_enum("combine", [&](const std::string& v) { m.direction.combine = parse_combine(v); });
  }
  s.get_size("num_layers", m.num_layers);
  s.get_size("hidden_dim", m.hidden_dim);
  s.get_number("dropout", m.dropout);
  s.get_size("mlp_layers", m.mlp_layers);
  s.get_size("heads", m.heads);
  s.get_number("magnet_q", m.magnet_q);
  s.get_size("cheb_order", m.cheb_order);
}

void parse_pe(const json& j, RunConfig& cfg) {
  Section s(j, "pe");
  s.allow({"mode", "q", "d", "m", "c"});
  pe::PEConfig& p = cfg.model.pe;
  s.get_enum("mode", [&](const std::string& v) { p.mode = pe::parse_pe_mode(v); });
  s.get_number("q", p.q);
  s.get_size("d", p.d);
  s.get_size("m", p.m);
  s.get_size("c", p.c);
  try {
    p.validate();
  } catch (const Error& e) {
    config_error("pe", e.what());
  }
}

void parse_train(const json& j, RunConfig& cfg) {
  Section s(j, "train");
  s.allow({"batch_size", "lr", "epochs_max", "patience", "seed", "beta1", "beta2", "eps"});
  TrainConfig& t = cfg.train;
  s.get_size("batch_size", t.batch_size);
  s.get_number("lr", t.lr);
  s.get_size("epochs_max", t.epochs_max);
  s.get_size("patience", t.patience);
  s.get_u64("seed", t.seed);
  s.get_number("beta1", t.beta1);
  s.get_number("beta2", t.beta2);
  s.get_number("eps", t.eps);
  t.validate();
}

void parse_protocol(const json& j, RunConfig& cfg) {
  Section s(j, "protocol");
  s.allow({"seeds", "method", "task"});
  if (s.has("seeds")) {
    const json& a = s.raw("seeds");
    if (!a.is_array() || a.empty()) config_error("protocol.seeds", "must be a non-empty array");
    cfg.seeds.clear();
    for (const json& v : a) {
      if (!v.is_number_integer() || v.get<long long>() < 0) config_error("protocol.seeds", "must hold non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  s.get("method", cfg.method);
  s.get("task", cfg.task);
}

void parse_tune(const json& j, RunConfig& cfg) {
  Section s(j, "tune");
  s.allow({"budget", "seed", "sampler", "space"});
  s.get_size("budget", cfg.tune.budget);
  if (cfg.tune.budget < 1) config_error("tune.budget", "must be >= 1");
  s.get_u64("seed", cfg.tune.seed);
  s.get_enum("sampler", [&](const std::string& v) {
    if (v == "tpe") cfg.tune.sampler = Sampler::kTpe;
    else if (v == "random") cfg.tune.sampler = Sampler::kRandom;
    else fail(ErrorCode::kConfigError, "expected 'tpe' or 'random'");
  });
  if (s.has("space")) {
    const json& sp = s.raw("space");
    if (!sp.is_object()) config_error("tune.space", "expected an object");
    static const std::set<std::string> known{"batch_size", "lr", "dropout", "hidden_dim", "num_layers", "mlp_layers", "q"};
    json normalized = json::object();
    for (const auto& [name, spec] : sp.items()) {
      if (!known.count(name)) fail(ErrorCode::kConfigError, "unknown key 'tune.space." + name + "'");
      try {
        SearchSpace probe;
        probe.set(parse_dimension(name, spec, "tune.space." + name));
        normalized[name] = dimension_to_json(probe.dims().front());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfigError && std::string(e.what()).find("tune.space") != std::string::npos) throw;
        config_error("tune.space." + name, e.what());
      }
    }
    cfg.tune.space = std::move(normalized);
  }
}

void parse_caps(const json& j, RunConfig& cfg) {
  Section s(j, "caps");
  s.allow({"pe_node_cap", "gps_node_cap"});
  s.get_size("pe_node_cap", cfg.model.pe_node_cap);
  s.get_size("gps_node_cap", cfg.model.gps_node_cap);
  if (cfg.model.pe_node_cap < 1) config_error("caps.pe_node_cap", "must be positive");
  if (cfg.model.gps_node_cap < 1) config_error("caps.gps_node_cap", "must be positive");
}

}  // namespace

std::size_t synthetic_max_nodes(const SyntheticSpec& spec) {
  const auto n_ood = static_cast<std::size_t>(std::llround(spec.ood_fraction * static_cast<double>(spec.num_graphs)));
  const bool has_ood = spec.num_graphs > 1 && std::min(n_ood, spec.num_graphs - 1) > 0;
  return has_ood ? 2 * spec.max_nodes : spec.max_nodes;
}

std::string method_name(const ModelConfig& m) {
  if (m.backbone == Backbone::kMagnet) return m.pe.mode == pe::PEMode::kNpe ? "MagNet+NPE" : "MagNet";
  std::string name;
  switch (m.direction.kind) {
    case DirectionKind::kPlane: break;
    case DirectionKind::kDirected: name = "DI-"; break;
    case DirectionKind::kBidirected: name = "BI-"; break;
  }
  switch (m.backbone) {
    case Backbone::kGcn: name += "GCN"; break;
    case Backbone::kGin: name += "GIN"; break;
    case Backbone::kGine: name += "GINE"; break;
    case Backbone::kGat: name += "GAT"; break;
    case Backbone::kGpsT: name += "GPS-T"; break;
    case Backbone::kMagnet: break;
  }
  if (m.pe.mode == pe::PEMode::kNpe) name += "+NPE";
  if (m.pe.mode == pe::PEMode::kEpe) name += "+EPE";
  return name;
}

RunConfig parse_run_config_json(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  Section s(root, "");
  s.allow({"dataset", "synthetic", "model", "pe", "train", "protocol", "tune", "output_dir", "caps"});
  RunConfig cfg;
  if (s.has("dataset") == s.has("synthetic")) {
    fail(ErrorCode::kConfigError, "dataset: exactly one of 'dataset' and 'synthetic' must be given");
  }
  if (s.has("dataset")) {
    std::string p;
    s.get("dataset", p);
    fs::path path(p);
    if (path.is_relative()) path = fs::path(base_dir) / path;
    if (!fs::exists(path)) config_error("dataset", "file '" + path.string() + "' does not exist");
    cfg.dataset_path = fs::weakly_canonical(path).string();
  } else {
    parse_synthetic(s.raw("synthetic"), cfg);
  }
  if (s.has("model")) parse_model(s.raw("model"), cfg);
  if (s.has("pe")) parse_pe(s.raw("pe"), cfg);
  if (s.has("train")) parse_train(s.raw("train"), cfg);
  if (s.has("protocol")) parse_protocol(s.raw("protocol"), cfg);
  if (s.has("tune")) parse_tune(s.raw("tune"), cfg);
  if (s.has("caps")) parse_caps(s.raw("caps"), cfg);
  s.get("output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) config_error("output_dir", "must not be empty");

  // Cross-field checks that need no data.
  FeatureDims dims{2, 0};  // synthetic graphs: [1, U(0,1)] node features, no edge features
  if (cfg.synthetic) {
    try {
      validate_model_config(cfg.model, dims);
    } catch (const Error& e) {
      config_error("model", e.what());
    }
    const std::size_t nmax = synthetic_max_nodes(*cfg.synthetic);
    if (cfg.model.backbone == Backbone::kGpsT && nmax > cfg.model.gps_node_cap) {
      config_error("caps.gps_node_cap", "synthetic graphs reach " + std::to_string(nmax) +
                                            " nodes, above gps_node_cap " + std::to_string(cfg.model.gps_node_cap));
    }
  } else {
    try {
      validate_model_config(cfg.model, FeatureDims{1, 1});
    } catch (const Error& e) {
      // Edge-feature dependent checks run once the dataset is loaded.
      if (e.code() != ErrorCode::kInvalidCombo || cfg.model.backbone != Backbone::kGine) config_error("model", e.what());
    }
  }
  if (cfg.method.empty()) cfg.method = method_name(cfg.model);
  if (cfg.task.empty()) {
    cfg.task = cfg.dataset_path ? fs::path(*cfg.dataset_path).stem().string()
                                : std::string(label_rule_name(cfg.synthetic->label_rule));
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_run_config_json(ss.str(), parent.empty() ? "." : parent.string());
}

std::string echo_run_config(const RunConfig& cfg) {
  json root = json::object();
  if (cfg.dataset_path) {
    root["dataset"] = *cfg.dataset_path;
  } else {
    const SyntheticSpec& sp = *cfg.synthetic;
    root["synthetic"] = {{"num_graphs", sp.num_graphs},
                         {"min_nodes", sp.min_nodes},
                         {"max_nodes", sp.max_nodes},
                         {"density", sp.density},
                         {"dag_only", sp.dag_only},
                         {"label_rule", std::string(label_rule_name(sp.label_rule))},
                         {"num_classes", sp.num_classes},
                         {"metrics", sp.metrics},
                         {"val_fraction", sp.val_fraction},
                         {"test_fraction", sp.test_fraction},
                         {"ood_fraction", sp.ood_fraction},
                         {"seed", cfg.synthetic_seed}};
  }
  const ModelConfig& m = cfg.model;
  json model = {{"backbone", std::string(backbone_name(m.backbone))},
                {"direction", std::string(direction_name(m.direction.kind))},
                {"num_layers", m.num_layers},
                {"hidden_dim", m.hidden_dim},
                {"dropout", m.dropout},
                {"mlp_layers", m.mlp_layers},
                {"heads", m.heads},
                {"magnet_q", m.magnet_q},
                {"cheb_order", m.cheb_order}};
  if (m.direction.kind == DirectionKind::kBidirected) model["combine"] = std::string(combine_name(m.direction.combine));
  root["model"] = std::move(model);
  root["pe"] = {{"mode", std::string(pe::pe_mode_name(m.pe.mode))},
                {"q", m.pe.q},
                {"d", m.pe.d},
                {"m", m.pe.m},
                {"c", m.pe.c}};
  const TrainConfig& t = cfg.train;
  root["train"] = {{"batch_size", t.batch_size}, {"lr", t.lr},       {"epochs_max", t.epochs_max},
                   {"patience", t.patience},     {"seed", t.seed},   {"beta1", t.beta1},
                   {"beta2", t.beta2},           {"eps", t.eps}};
  root["protocol"] = {{"seeds", cfg.seeds}, {"method", cfg.method}, {"task", cfg.task}};
  root["tune"] = {{"budget", cfg.tune.budget},
                  {"seed", cfg.tune.seed},
                  {"sampler", cfg.tune.sampler == Sampler::kTpe ? "tpe" : "random"},
                  {"space", cfg.tune.space}};
  root["caps"] = {{"pe_node_cap", m.pe_node_cap}, {"gps_node_cap", m.gps_node_cap}};
  root["output_dir"] = cfg.output_dir;
  return root.dump(2) + "\n";
}

Dataset materialize_dataset(const RunConfig& cfg) {
  if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
  return generate_synthetic(*cfg.synthetic, cfg.synthetic_seed);
}

SearchSpace run_search_space(const RunConfig& cfg) {
  SearchSpace space = default_search_space(std::string(backbone_name(cfg.model.backbone)),
                                           cfg.model.pe.mode != pe::PEMode::kNone);
  for (const auto& [name, spec] : cfg.tune.space.items()) space.set(parse_dimension(name, spec, "tune.space." + name));
  return space;
}

void apply_trial(const TrialConfig& trial, ModelConfig& model, TrainConfig& train) {
  for (const auto& [name, v] : trial) {
    const double x = as_number(v);
    if (name == "batch_size") train.batch_size = static_cast<std::size_t>(std::llround(x));
    else if (name == "lr") train.lr = x;
    else if (name == "dropout") model.dropout = x;
    else if (name == "hidden_dim") model.hidden_dim = static_cast<std::size_t>(std::llround(x));
    else if (name == "num_layers") model.num_layers = static_cast<std::size_t>(std::llround(x));
    else if (name == "mlp_layers") model.mlp_layers = static_cast<std::size_t>(std::llround(x));
    else if (name == "q") model.pe.q = x;
    else fail(ErrorCode::kConfigError, "tune.space: no setting named '" + name + "'");
  }
  if ((model.backbone == Backbone::kGat || model.backbone == Backbone::kGpsT) && model.heads > 0 &&
      model.hidden_dim % model.heads != 0) {
    model.hidden_dim += model.heads - model.hidden_dim % model.heads;
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const std::string& dir, const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& artifacts) {
  json arts = json::array();
  for (const std::string& a : artifacts) {
    std::ifstream in(fs::path(dir) / a, std::ios::binary);
    if (!in) continue;
    std::stringstream ss;
    ss << in.rdbuf();
    arts.push_back({{"path", a}, {"fnv1a64", fnv1a_hex(ss.str())}});
  }
  json manifest = {{"command", command},
                   {"config", json::parse(echo_run_config(cfg))},
                   {"seeds", cfg.seeds},
                   {"train_seed", cfg.train.seed},
                   {"synthetic_seed", cfg.synthetic_seed},
                   {"artifacts", arts},
                   {"format_version", 1}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) fail(ErrorCode::kIoError, "cannot write manifest in '" + dir + "'");
  out << manifest.dump(2) << "\n";
}

}  // namespace dgrl
