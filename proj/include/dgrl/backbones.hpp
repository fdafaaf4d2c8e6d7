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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgrl/autodiff.hpp"
#include "dgrl/graph.hpp"
#include "dgrl/nn.hpp"
#include "dgrl/spectral_pe.hpp"

namespace dgrl {

enum class DirectionKind { kPlane, kDirected, kBidirected };
enum class Combine { kMean, kSum };

/// Message-passing direction. combine only matters for bidirected.
struct DirectionMode {
  DirectionKind kind = DirectionKind::kBidirected;
  Combine combine = Combine::kMean;

  std::size_t num_param_sets() const { return kind == DirectionKind::kBidirected ? 2 : 1; }
  bool operator==(const DirectionMode&) const = default;
};

std::string_view direction_name(DirectionKind kind);
DirectionKind parse_direction(std::string_view name);
std::string_view combine_name(Combine c);
Combine parse_combine(std::string_view name);

enum class BranchTag { kShared, kForward, kReverse };

/// One message list with the parameter set that processes it.
struct MessageBranch {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  /// Row of the edge-feature matrix that each message carries.
  std::vector<std::size_t> edge_row;
  BranchTag tag = BranchTag::kShared;

  std::size_t param_set() const { return tag == BranchTag::kReverse ? 1 : 0; }
};

/// plane: one shared branch holding E then reverse(E); directed: E forward;
/// bidirected: E forward plus reverse(E) reverse.
std::vector<MessageBranch> expand_direction(const std::vector<Edge>& edges, DirectionMode mode);
std::vector<MessageBranch> expand_direction(const DirectedGraph& g, DirectionMode mode);

/// A graph plus the preprocessing a model needs for it.
struct PreparedGraph {
  const DirectedGraph* graph = nullptr;
  std::optional<pe::SpectralDecomposition> spectrum;
  std::optional<pe::EpeBasis> epe_basis;
  std::optional<pe::SparseComplex> magnetic;
};

/// Disjoint union of graphs (block-diagonal adjacency).
struct GraphBatch {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  ad::Tensor x;
  std::optional<ad::Tensor> edge_features;
  std::vector<std::size_t> node_offset;  // num_graphs + 1
  std::vector<std::size_t> edge_offset;  // num_graphs + 1
  std::vector<std::size_t> node_graph;   // graph index per node
  std::vector<const PreparedGraph*> graphs;
  /// Union of per-graph I - L_q entries, present for MagNet models.
  std::optional<pe::SparseComplex> magnetic;

  std::size_t num_graphs() const { return graphs.size(); }
};

struct BatchOptions {
  bool append_npe = false;
  bool with_magnetic = false;
};

GraphBatch make_batch(const std::vector<const PreparedGraph*>& graphs, const BatchOptions& options);

/// Per-layer inputs. edge_attr rows follow batch.edges; epe (when set) has one
/// entry per graph of the batch.
struct LayerInput {
  const GraphBatch* batch = nullptr;
  ad::Tensor x;
  std::optional<ad::Tensor> edge_attr;
  const std::vector<pe::EpeTensor>* epe = nullptr;
};

/// Sums branch outputs for plane/directed, combines the two for bidirected.
ad::Tensor combine_branches(const std::vector<ad::Tensor>& outputs, DirectionMode mode);

/// GIN (edge_dim == 0) or GINE layer:
///   x' = MLP(x_i + combine_b sum_{j->i in b} phi_b(x_j, e_ji))
/// with phi_b(x, e) = x W_b for GIN and relu(x W_b + e P_b + p_b) for GINE.
/// W_b/P_b are the direction-tagged parameters; the update MLP is shared.
class GinLayer {
 public:
  GinLayer() = default;
  GinLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden,
           std::size_t edge_dim);

  ad::Tensor forward(const LayerInput& in, const nn::ForwardContext& ctx) const;

  const std::vector<nn::Linear>& message() const { return message_; }
  const std::vector<nn::Linear>& edge_projection() const { return edge_proj_; }
  const nn::Mlp& mlp() const { return mlp_; }
  bool uses_edges() const { return !edge_proj_.empty(); }

 private:
  DirectionMode mode_;
  std::vector<nn::Linear> message_;
  std::vector<nn::Linear> edge_proj_;
  nn::Mlp mlp_;
};

/// GCN with self-loops and symmetric 1/sqrt(d_j d_i) normalization, where
/// d counts weighted incoming branch messages plus the self-loop. Each branch
/// owns its own theta (and edge-weight projection when edge_dim > 0).
class GcnLayer {
 public:
  GcnLayer() = default;
  GcnLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t in, std::size_t out,
           std::size_t edge_dim);

  ad::Tensor forward(const LayerInput& in, const nn::ForwardContext& ctx) const;
  /// Forward with explicit per-edge weights [E x 1] (overrides any projection).
  ad::Tensor forward_weighted(const LayerInput& in, const ad::Tensor& edge_weight) const;

  const std::vector<nn::Linear>& theta() const { return theta_; }

 private:
  ad::Tensor branch(const LayerInput& in, const MessageBranch& b, const ad::Tensor& weights) const;

  DirectionMode mode_;
  std::vector<nn::Linear> theta_;
  std::vector<nn::Linear> edge_weight_;
};

struct GatParams {
  nn::Linear theta_s;
  nn::Linear theta_t;
  nn::Linear theta_e;  // undefined when the layer has no edge input
  ad::Tensor a_s;      // [1 x hidden], head h owns columns [h*dh, (h+1)*dh)
  ad::Tensor a_t;
  ad::Tensor a_e;
};

/// Multi-head GAT with self-loops; LeakyReLU slope 0.2; heads concatenated.
class GatLayer {
 public:
  GatLayer() = default;
  GatLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden, std::size_t heads,
           std::size_t edge_dim);

  ad::Tensor forward(const LayerInput& in, const nn::ForwardContext& ctx) const;

  /// Attention coefficients of one branch: per head an [(M + N) x 1] column over
  /// the branch messages followed by the N self-loops, plus the target node
  /// of every row.
  std::pair<std::vector<ad::Tensor>, std::vector<std::size_t>> attention(const LayerInput& in,
                                                                          std::size_t branch_index) const;

  const std::vector<GatParams>& params() const { return params_; }
  std::size_t heads() const { return heads_; }

 private:
  ad::Tensor branch(const LayerInput& in, const MessageBranch& b, std::vector<ad::Tensor>* alphas) const;

  DirectionMode mode_;
  std::size_t hidden_ = 0;
  std::size_t heads_ = 1;
  std::vector<GatParams> params_;
};

/// Complex ReLU: keeps z when -pi/2 <= arg z < pi/2, zero otherwise (and at z = 0).
std::pair<ad::Tensor, ad::Tensor> complex_relu(const ad::Tensor& re, const ad::Tensor& im);

/// First-order MagNet surrogate: X' = sigma((I - L_q) X W + b) with complex W
/// and a bias shared by the real and imaginary parts.
class MagnetLayer {
 public:
  MagnetLayer() = default;
  MagnetLayer(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out);

  std::pair<ad::Tensor, ad::Tensor> forward(const pe::SparseComplex& propagation, const ad::Tensor& re,
                                            const ad::Tensor& im) const;

  ad::Tensor weight_re() const { return w_re_; }
  ad::Tensor weight_im() const { return w_im_; }
  ad::Tensor bias() const { return bias_; }

 private:
  ad::Tensor w_re_;
  ad::Tensor w_im_;
  ad::Tensor bias_;
};

/// Dense scaled dot-product multi-head attention within one graph.
class AttentionLayer {
 public:
  AttentionLayer() = default;
  AttentionLayer(ad::ParamStore& store, const std::string& name, std::size_t hidden, std::size_t heads,
                 std::size_t node_cap);

  /// x is [n x hidden]; bias, when given, holds one [n x n] tensor per head
  /// added to the logits before the softmax. Throws NodeCapExceeded.
  ad::Tensor forward(const ad::Tensor& x, const std::vector<ad::Tensor>* bias = nullptr) const;

  /// Row-wise attention probabilities per head (diagnostics and tests).
  std::vector<ad::Tensor> probabilities(const ad::Tensor& x, const std::vector<ad::Tensor>* bias = nullptr) const;

  const nn::Linear& query() const { return wq_; }
  const nn::Linear& key() const { return wk_; }
  const nn::Linear& value() const { return wv_; }
  const nn::Linear& output() const { return wo_; }
  std::size_t heads() const { return heads_; }
  std::size_t node_cap() const { return node_cap_; }

 private:
  std::size_t hidden_ = 0;
  std::size_t heads_ = 1;
  std::size_t node_cap_ = 0;
  nn::Linear wq_, wk_, wv_, wo_;
};

/// X_M = MPNN(X, E); X_T = GlobalAttn(X); X' = MLP(X_M + X_T), with GIN/GINE
/// as the MPNN and, under EPE, a per-head projection of the EPE tensor as
/// attention bias.
class GpsLayer {
 public:
  GpsLayer() = default;
  GpsLayer(ad::ParamStore& store, const std::string& name, DirectionMode mode, std::size_t hidden, std::size_t heads,
           std::size_t edge_dim, std::size_t epe_channels, std::size_t node_cap);

  ad::Tensor forward(const LayerInput& in, const nn::ForwardContext& ctx) const;

  const GinLayer& mpnn() const { return mpnn_; }
  const AttentionLayer& attention() const { return attn_; }
  const nn::Mlp& mlp() const { return mlp_; }
  ad::Tensor bias_projection() const { return bias_proj_; }

 private:
  GinLayer mpnn_;
  AttentionLayer attn_;
  nn::Mlp mlp_;
  ad::Tensor bias_proj_;
};

/// Applies attention separately to each graph of a batch and restacks rows.
ad::Tensor batched_attention(const AttentionLayer& attn, const GraphBatch& batch, const ad::Tensor& x,
                             const std::vector<pe::EpeTensor>* epe, const ad::Tensor& bias_projection);

}  // namespace dgrl
