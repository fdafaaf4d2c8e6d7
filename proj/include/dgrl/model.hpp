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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgrl/autodiff.hpp"
#include "dgrl/backbones.hpp"
#include "dgrl/graph.hpp"
#include "dgrl/nn.hpp"
#include "dgrl/spectral_pe.hpp"

namespace dgrl {

enum class Backbone { kGcn, kGin, kGine, kGat, kMagnet, kGpsT };

std::string_view backbone_name(Backbone b);
Backbone parse_backbone(std::string_view name);

inline constexpr std::size_t kDefaultGpsNodeCap = 5000;

struct ModelConfig {
  Backbone backbone = Backbone::kGin;
  DirectionMode direction;
  std::size_t num_layers = 3;
  std::size_t hidden_dim = 64;
  double dropout = 0.0;
  /// Linear layers in the prediction head.
  std::size_t mlp_layers = 2;
  pe::PEConfig pe;
  std::size_t heads = 4;
  std::size_t gps_node_cap = kDefaultGpsNodeCap;
  std::size_t pe_node_cap = pe::kDefaultPeNodeCap;
  /// Potential used by the MagNet propagation matrix.
  double magnet_q = 0.25;
  /// Only first-order MagNet filters are implemented.
  std::size_t cheb_order = 1;

  bool operator==(const ModelConfig&) const = default;
};

struct FeatureDims {
  std::size_t node = 0;
  std::size_t edge = 0;
};

FeatureDims feature_dims(const Dataset& d);

/// Checks the config against feature dims. Throws InvalidCombo / ConfigError.
/// Non-fatal notes (e.g. an ignored direction) are appended to warnings.
void validate_model_config(const ModelConfig& cfg, FeatureDims dims, std::vector<std::string>* warnings = nullptr);

class Model {
 public:
  Model(const ModelConfig& cfg, FeatureDims dims, TaskSpec task, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// Spectral and MagNet preprocessing for one graph. Throws NodeCapExceeded.
  PreparedGraph prepare(const DirectedGraph& g, const pe::PeCache* cache = nullptr) const;
  /// Prepares every graph, spreading work over up to jobs threads.
  std::vector<PreparedGraph> prepare_all(const std::vector<DirectedGraph>& graphs, const pe::PeCache* cache = nullptr,
                                         std::size_t jobs = 1) const;
  GraphBatch batch(const std::vector<const PreparedGraph*>& graphs) const;

  /// Node embeddings after the last layer: [N x embedding_dim()].
  ad::Tensor embed(const GraphBatch& batch, const nn::ForwardContext& ctx) const;
  /// Node predictions [N x out] or graph predictions [B x out].
  ad::Tensor forward(const GraphBatch& batch, const nn::ForwardContext& ctx) const;

  const ModelConfig& config() const { return cfg_; }
  const TaskSpec& task() const { return task_; }
  FeatureDims dims() const { return dims_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t edge_input_dim() const { return edge_dim_; }
  std::size_t embedding_dim() const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  const nn::Linear& encoder() const { return encoder_; }
  const nn::Mlp& head() const { return head_; }
  const std::vector<GinLayer>& gin_layers() const { return gin_; }
  const std::vector<GcnLayer>& gcn_layers() const { return gcn_; }
  const std::vector<GatLayer>& gat_layers() const { return gat_; }
  const std::vector<MagnetLayer>& magnet_layers() const { return magnet_; }
  const std::vector<GpsLayer>& gps_layers() const { return gps_; }
  const pe::EPENetworks* epe_networks() const { return has_epe_ ? &epe_nets_ : nullptr; }

 private:
  std::vector<pe::EpeTensor> epe_tensors(const GraphBatch& batch) const;

  ModelConfig cfg_;
  FeatureDims dims_;
  TaskSpec task_;
  std::vector<std::string> warnings_;
  std::size_t input_dim_ = 0;
  std::size_t edge_dim_ = 0;
  bool has_epe_ = false;
  ad::ParamStore store_;
  nn::Linear encoder_;
  pe::EPENetworks epe_nets_;
  std::vector<GinLayer> gin_;
  std::vector<GcnLayer> gcn_;
  std::vector<GatLayer> gat_;
  std::vector<MagnetLayer> magnet_;
  std::vector<GpsLayer> gps_;
  nn::Mlp head_;
};

Model build_model(const ModelConfig& cfg, FeatureDims dims, const TaskSpec& task, std::uint64_t seed = 0);

/// Node tasks: head per node. Graph tasks: mean over each graph's nodes, then head.
ad::Tensor readout(const ad::Tensor& x, const TaskSpec& task, const nn::Mlp& head, const std::vector<std::size_t>& node_graph,
                   std::size_t num_graphs, const nn::ForwardContext& ctx);

/// Mean of node rows per graph: [num_graphs x cols].
ad::Tensor mean_pool(const ad::Tensor& x, const std::vector<std::size_t>& node_graph, std::size_t num_graphs);

struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_echo;
  std::string rng_state;
  std::vector<std::pair<std::string, RealMatrix>> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& ck, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, std::string config_echo, std::string rng_state);
/// Copies named parameters into the model. Throws SchemaError on a name or shape mismatch.
void apply_checkpoint(Model& model, const Checkpoint& ck);

}  // namespace dgrl
