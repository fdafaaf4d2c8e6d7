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

#include "dgrl/model.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "dgrl/error.hpp"

namespace dgrl {

std::string_view backbone_name(Backbone b) {
  switch (b) {
    case Backbone::kGcn: return "gcn";
    case Backbone::kGin: return "gin";
    case Backbone::kGine: return "gine";
    case Backbone::kGat: return "gat";
    case Backbone::kMagnet: return "magnet";
    case Backbone::kGpsT: return "gps_t";
  }
  return "?";
}

Backbone parse_backbone(std::string_view name) {
  for (Backbone b : {Backbone::kGcn, Backbone::kGin, Backbone::kGine, Backbone::kGat, Backbone::kMagnet,
                     Backbone::kGpsT}) {
    if (backbone_name(b) == name) return b;
  }
  fail(ErrorCode::kConfigError, "unknown backbone '" + std::string(name) + "'");
}

FeatureDims feature_dims(const Dataset& d) {
  FeatureDims dims;
  if (d.graphs.empty()) return dims;
  dims.node = d.graphs.front().node_features().cols;
  if (d.graphs.front().edge_features()) dims.edge = d.graphs.front().edge_features()->cols;
  return dims;
}

void validate_model_config(const ModelConfig& cfg, FeatureDims dims, std::vector<std::string>* warnings) {
  if (cfg.num_layers < 1) fail(ErrorCode::kConfigError, "model.num_layers must be >= 1");
  if (cfg.hidden_dim < 1) fail(ErrorCode::kConfigError, "model.hidden_dim must be >= 1");
  if (cfg.mlp_layers < 1) fail(ErrorCode::kConfigError, "model.mlp_layers must be >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) fail(ErrorCode::kConfigError, "model.dropout must lie in [0, 1)");
  if (cfg.gps_node_cap < 1) fail(ErrorCode::kConfigError, "caps.gps_node_cap must be positive");
  if (cfg.pe_node_cap < 1) fail(ErrorCode::kConfigError, "caps.pe_node_cap must be positive");
  cfg.pe.validate();
  const bool epe = cfg.pe.mode == pe::PEMode::kEpe;
  switch (cfg.backbone) {
    case Backbone::kMagnet:
      if (epe) {
        fail(ErrorCode::kInvalidCombo,
             "magnet + epe: MagNet only accepts 1-dimensional edge weights and cannot use EPE");
      }
      if (cfg.cheb_order != 1) fail(ErrorCode::kInvalidCombo, "magnet: only cheb_order 1 is implemented");
      if (warnings) {
        warnings->push_back("magnet: direction '" + std::string(direction_name(cfg.direction.kind)) +
                            "' ignored, the magnetic Laplacian already encodes edge direction");
      }
      break;
    case Backbone::kGin:
      if (epe) fail(ErrorCode::kInvalidCombo, "gin + epe: GIN has no edge input, use gine to feed EPE to messages");
      break;
    case Backbone::kGine:
      if (dims.edge == 0 && !epe) {
        fail(ErrorCode::kInvalidCombo, "gine needs edge features or pe.mode = epe");
      }
      break;
    case Backbone::kGat:
    case Backbone::kGpsT:
      if (cfg.heads == 0 || cfg.hidden_dim % cfg.heads != 0) {
        fail(ErrorCode::kInvalidCombo, "model.hidden_dim " + std::to_string(cfg.hidden_dim) +
                                           " must be divisible by model.heads " + std::to_string(cfg.heads));
      }
      break;
    case Backbone::kGcn:
      break;
  }
}

Model::Model(const ModelConfig& cfg, FeatureDims dims, TaskSpec task, std::uint64_t seed)
    : cfg_(cfg), dims_(dims), task_(std::move(task)), store_(seed) {
  validate_model_config(cfg_, dims_, &warnings_);
  const bool npe = cfg_.pe.mode == pe::PEMode::kNpe;
  has_epe_ = cfg_.pe.mode == pe::PEMode::kEpe;
  input_dim_ = dims_.node + (npe ? 2 * cfg_.pe.d : 0);
  edge_dim_ = dims_.edge + (has_epe_ ? cfg_.pe.c : 0);
  if (input_dim_ == 0) fail(ErrorCode::kShapeMismatch, "model: graphs carry no node features");

  const std::size_t h = cfg_.hidden_dim;
  encoder_ = nn::Linear(store_, "encoder", input_dim_, h);
  if (has_epe_) epe_nets_ = pe::EPENetworks(store_, "epe", cfg_.pe.m, cfg_.pe.c);
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string name = "layer" + std::to_string(l);
    switch (cfg_.backbone) {
      case Backbone::kGin: gin_.emplace_back(store_, name, cfg_.direction, h, 0); break;
      case Backbone::kGine: gin_.emplace_back(store_, name, cfg_.direction, h, edge_dim_); break;
      case Backbone::kGcn: gcn_.emplace_back(store_, name, cfg_.direction, h, h, edge_dim_); break;
      case Backbone::kGat: gat_.emplace_back(store_, name, cfg_.direction, h, cfg_.heads, edge_dim_); break;
      case Backbone::kMagnet: magnet_.emplace_back(store_, name, h, h); break;
      case Backbone::kGpsT:
        gps_.emplace_back(store_, name, cfg_.direction, h, cfg_.heads, edge_dim_, has_epe_ ? cfg_.pe.c : 0,
                          cfg_.gps_node_cap);
        break;
    }
  }
  std::vector<std::size_t> head_dims(cfg_.mlp_layers, embedding_dim());
  head_dims.push_back(task_.output_dim());
  head_ = nn::Mlp(store_, "head", head_dims);
}

std::size_t Model::embedding_dim() const {
  return cfg_.backbone == Backbone::kMagnet ? 2 * cfg_.hidden_dim : cfg_.hidden_dim;
}

PreparedGraph Model::prepare(const DirectedGraph& g, const pe::PeCache* cache) const {
  PreparedGraph p;
  p.graph = &g;
  const std::size_t n = g.num_nodes();
  if (cfg_.backbone == Backbone::kGpsT && n > cfg_.gps_node_cap) {
    fail(ErrorCode::kNodeCapExceeded, "gps_t: graph with " + std::to_string(n) + " nodes exceeds gps_node_cap " +
                                          std::to_string(cfg_.gps_node_cap));
  }
  if (cfg_.pe.mode != pe::PEMode::kNone) {
    if (n > cfg_.pe_node_cap) {
      fail(ErrorCode::kNodeCapExceeded, "positional encoding: graph with " + std::to_string(n) +
                                            " nodes exceeds pe_node_cap " + std::to_string(cfg_.pe_node_cap));
    }
    p.spectrum = pe::cached_pe_basis(g, cfg_.pe.q, cfg_.pe.d, cache);
    if (has_epe_) p.epe_basis = pe::make_epe_basis(*p.spectrum, cfg_.pe_node_cap);
  }
  if (cfg_.backbone == Backbone::kMagnet) p.magnetic = pe::magnetic_propagation(g, cfg_.magnet_q);
  return p;
}

std::vector<PreparedGraph> Model::prepare_all(const std::vector<DirectedGraph>& graphs, const pe::PeCache* cache,
                                              std::size_t jobs) const {
  std::vector<PreparedGraph> out(graphs.size());
  if (jobs <= 1 || graphs.size() < 2) {
    for (std::size_t i = 0; i < graphs.size(); ++i) out[i] = prepare(graphs[i], cache);
    return out;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= graphs.size() || first_error) return;
        i = next++;
      }
      try {
        out[i] = prepare(graphs[i], cache);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, graphs.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

GraphBatch Model::batch(const std::vector<const PreparedGraph*>& graphs) const {
  BatchOptions opt;
  opt.append_npe = cfg_.pe.mode == pe::PEMode::kNpe;
  opt.with_magnetic = cfg_.backbone == Backbone::kMagnet;
  GraphBatch b = make_batch(graphs, opt);
  if (b.x.cols() != input_dim_ && b.num_nodes > 0) {
    fail(ErrorCode::kShapeMismatch, "model expects " + std::to_string(input_dim_) + " input columns, batch has " +
                                        std::to_string(b.x.cols()));
  }
  const std::size_t e = b.edge_features ? b.edge_features->cols() : 0;
  if (!b.edges.empty() && e != dims_.edge) {
    fail(ErrorCode::kShapeMismatch, "model expects " + std::to_string(dims_.edge) + " edge feature columns, batch has " +
                                        std::to_string(e));
  }
  return b;
}

std::vector<pe::EpeTensor> Model::epe_tensors(const GraphBatch& batch) const {
  std::vector<pe::EpeTensor> out;
  out.reserve(batch.num_graphs());
  for (const PreparedGraph* p : batch.graphs) {
    if (!p->epe_basis) fail(ErrorCode::kShapeMismatch, "model: EPE basis missing, prepare the graph first");
    out.push_back(pe::epe(*p->epe_basis, epe_nets_));
  }
  return out;
}

ad::Tensor Model::embed(const GraphBatch& batch, const nn::ForwardContext& ctx) const {
  ad::Tensor h = encoder_(batch.x);

  if (cfg_.backbone == Backbone::kMagnet) {
    if (!batch.magnetic) fail(ErrorCode::kShapeMismatch, "model: MagNet batch lacks the propagation matrix");
    ad::Tensor re = h;
    ad::Tensor im = ad::Tensor::zeros(h.rows(), h.cols());
    for (const MagnetLayer& layer : magnet_) {
      auto [r, i] = layer.forward(*batch.magnetic, re, im);
      re = ctx.apply_dropout(r);
      im = ctx.apply_dropout(i);
    }
    return ad::concat({re, im}, 1);
  }

  std::vector<pe::EpeTensor> epe;
  if (has_epe_) epe = epe_tensors(batch);
  std::optional<ad::Tensor> edge_attr;
  if (edge_dim_ > 0 && !batch.edges.empty()) {
    std::vector<ad::Tensor> cols;
    if (batch.edge_features) cols.push_back(*batch.edge_features);
    if (has_epe_) {
      std::vector<ad::Tensor> rows;
      for (std::size_t gi = 0; gi < batch.num_graphs(); ++gi) {
        if (batch.graphs[gi]->graph->num_edges() > 0) rows.push_back(pe::epe_edge_slice(epe[gi], *batch.graphs[gi]->graph));
      }
      cols.push_back(rows.size() == 1 ? rows.front() : ad::concat(rows, 0));
    }
    edge_attr = cols.size() == 1 ? cols.front() : ad::concat(cols, 1);
  } else if (edge_dim_ > 0) {
    edge_attr = ad::Tensor::zeros(0, edge_dim_);
  }

  LayerInput in;
  in.batch = &batch;
  in.edge_attr = edge_attr;
  in.epe = has_epe_ ? &epe : nullptr;
  auto step = [&](const ad::Tensor& y) { return ctx.apply_dropout(ad::relu(y)); };
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    in.x = h;
    switch (cfg_.backbone) {
      case Backbone::kGin:
      case Backbone::kGine: h = step(gin_[l].forward(in, ctx)); break;
      case Backbone::kGcn: h = step(gcn_[l].forward(in, ctx)); break;
      case Backbone::kGat: h = step(gat_[l].forward(in, ctx)); break;
      case Backbone::kGpsT: h = step(gps_[l].forward(in, ctx)); break;
      case Backbone::kMagnet: break;
    }
  }
  return h;
}

ad::Tensor Model::forward(const GraphBatch& batch, const nn::ForwardContext& ctx) const {
  return readout(embed(batch, ctx), task_, head_, batch.node_graph, batch.num_graphs(), ctx);
}

Model build_model(const ModelConfig& cfg, FeatureDims dims, const TaskSpec& task, std::uint64_t seed) {
  return Model(cfg, dims, task, seed);
}

ad::Tensor mean_pool(const ad::Tensor& x, const std::vector<std::size_t>& node_graph, std::size_t num_graphs) {
  if (node_graph.size() != x.rows()) fail(ErrorCode::kShapeMismatch, "mean_pool: one graph index per row expected");
  std::vector<double> inv(num_graphs, 0.0);
  for (std::size_t g : node_graph) {
    if (g >= num_graphs) fail(ErrorCode::kIndexOutOfRange, "mean_pool: graph index out of range");
    inv[g] += 1.0;
  }
  for (double& v : inv) v = v > 0.0 ? 1.0 / v : 0.0;
  return ad::mul(ad::scatter_add_rows(x, node_graph, num_graphs), ad::Tensor::constant(num_graphs, 1, std::move(inv)));
}

ad::Tensor readout(const ad::Tensor& x, const TaskSpec& task, const nn::Mlp& head, const std::vector<std::size_t>& node_graph,
                   std::size_t num_graphs, const nn::ForwardContext& ctx) {
  if (task.level == TaskLevel::kNode) return head.forward(x, ctx);
  return head.forward(mean_pool(x, node_graph, num_graphs), ctx);
}

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'G', 'R', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCode::kParseError, "checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& in) {
  const auto len = take<std::uint64_t>(in);
  if (len > (1ULL << 32)) fail(ErrorCode::kParseError, "checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorCode::kParseError, "checkpoint: truncated file");
  return s;
}

}  // namespace

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ck.config_echo);
  put_string(out, ck.rng_state);
  put<std::uint64_t>(out, ck.params.size());
  for (const auto& [name, m] : ck.params) {
    put_string(out, name);
    put<std::uint64_t>(out, m.rows);
    put<std::uint64_t>(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  }
  if (!out) fail(ErrorCode::kIoError, "checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail(ErrorCode::kParseError, "checkpoint: bad magic");
  Checkpoint ck;
  ck.version = take<std::uint32_t>(in);
  if (ck.version != kCheckpointVersion) {
    fail(ErrorCode::kParseError, "checkpoint: unsupported version " + std::to_string(ck.version));
  }
  ck.config_echo = take_string(in);
  ck.rng_state = take_string(in);
  const auto count = take<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = take_string(in);
    RealMatrix m;
    m.rows = take<std::uint64_t>(in);
    m.cols = take<std::uint64_t>(in);
    if (m.rows * m.cols > (1ULL << 32)) fail(ErrorCode::kParseError, "checkpoint: implausible parameter size");
    m.data.resize(m.rows * m.cols);
    in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in) fail(ErrorCode::kParseError, "checkpoint: truncated parameter '" + name + "'");
    ck.params.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write checkpoint '" + path + "'");
  write_checkpoint(ck, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read checkpoint '" + path + "'");
  return read_checkpoint(in);
}

Checkpoint make_checkpoint(const Model& model, std::string config_echo, std::string rng_state) {
  Checkpoint ck;
  ck.config_echo = std::move(config_echo);
  ck.rng_state = std::move(rng_state);
  for (const auto& [name, t] : model.params().entries()) ck.params.emplace_back(name, t.to_matrix());
  return ck;
}

void apply_checkpoint(Model& model, const Checkpoint& ck) {
  if (ck.params.size() != model.params().size()) {
    fail(ErrorCode::kSchemaError, "checkpoint has " + std::to_string(ck.params.size()) + " parameters, model has " +
                                      std::to_string(model.params().size()));
  }
  for (const auto& [name, m] : ck.params) {
    const ad::Tensor* t = model.params().find(name);
    if (!t) fail(ErrorCode::kSchemaError, "checkpoint parameter '" + name + "' not in model");
    if (t->rows() != m.rows || t->cols() != m.cols) {
      fail(ErrorCode::kSchemaError, "checkpoint parameter '" + name + "' has the wrong shape");
    }
    ad::Tensor handle = *t;
    handle.mutable_values() = m.data;
  }
}

}  // namespace dgrl
