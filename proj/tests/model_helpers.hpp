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

// Model-level fixtures shared by the backbone unit tests and the acceptance
// binary: layer gradient checks, direction-tie helpers and embeddings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dgrl/autodiff.hpp"
#include "dgrl/backbones.hpp"
#include "dgrl/model.hpp"
#include "dgrl/nn.hpp"
#include "dgrl/spectral_pe.hpp"
#include "dgrl/synthetic.hpp"
#include "helpers.hpp"

namespace dgrl::testing {

inline ad::Tensor probe_sum(const ad::Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(t, ad::Tensor::constant(t.rows(), t.cols(), random_matrix(t.rows(), t.cols(), rng).data)));
}

inline RealMatrix embed_graph(const Model& m, const DirectedGraph& g) {
  const PreparedGraph p = m.prepare(g);
  const GraphBatch b = m.batch({&p});
  return m.embed(b, nn::ForwardContext{}).to_matrix();
}

inline RealMatrix predict_graphs(const Model& m, const std::vector<DirectedGraph>& graphs) {
  std::vector<PreparedGraph> prepared;
  for (const auto& g : graphs) prepared.push_back(m.prepare(g));
  std::vector<const PreparedGraph*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  return m.forward(m.batch(ptrs), nn::ForwardContext{}).to_matrix();
}

/// max_i |a[i] - b[perm[i]]| over node rows.
inline double permuted_row_diff(const RealMatrix& a, const RealMatrix& b, const std::vector<std::size_t>& perm) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t c = 0; c < a.cols; ++c) worst = std::max(worst, std::abs(a(i, c) - b(perm[i], c)));
  }
  return worst;
}

/// Copies a plane model's shared parameters into both branches of a
/// bidirected model; all other names must match exactly.
inline void tie_from_plane(const Model& plane, Model& bi) {
  for (const auto& [name, t] : bi.params().entries()) {
    std::string src = name;
    for (const char* tag : {".fwd.", ".rev."}) {
      if (auto pos = src.find(tag); pos != std::string::npos) src.replace(pos, 5, ".shared.");
    }
    nn::assign(t, plane.params().get(src).values());
  }
}

/// Graph with every edge pointing into node 0.
inline DirectedGraph inward_star(std::size_t n, std::mt19937_64& rng, std::size_t features = 3) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.push_back({i, 0});
  return build_graph(n, std::move(edges), random_matrix(n, features, rng));
}

/// Longest-path regression graphs re-tagged as train graphs, then val
/// graphs, then two test_id and two test_ood graphs.
inline Dataset longest_path_dataset(std::size_t train, std::size_t val, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_graphs = train + val + 4;
  spec.min_nodes = 4;
  spec.max_nodes = 8;
  spec.density = 0.3;
  spec.metrics = {"mse", "rmse", "r2"};
  Dataset d = generate_synthetic(spec, seed);
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    if (i < train) d.splits[i] = Split::kTrain;
    else if (i < train + val) d.splits[i] = Split::kVal;
    else if (i < train + val + 2) d.splits[i] = Split::kTestId;
    else d.splits[i] = Split::kTestOod;
  }
  return d;
}

struct GradCase {
  std::string name;
  double error = 0.0;
};

/// Moves every parameter to a generic point (biases start at exactly 0, which
/// can sit on a relu kink when an input row is identically zero).
inline void jitter(ad::ParamStore& store, std::mt19937_64& rng, double amount = 0.1) {
  std::uniform_real_distribution<double> u(-amount, amount);
  for (const auto& entry : store.entries()) {
    ad::Tensor t = entry.second;
    for (double& v : t.mutable_values()) v += u(rng);
  }
}

namespace detail {

struct LayerFixture {
  DirectedGraph graph;
  PreparedGraph prepared;
  GraphBatch batch;
  std::size_t hidden = 8;
};

inline LayerFixture make_fixture(std::mt19937_64& rng, std::size_t n, std::size_t hidden, std::size_t edge_features) {
  LayerFixture f;
  RandomGraphOptions opt;
  opt.density = 0.35;
  opt.node_features = hidden;
  opt.edge_features = edge_features;
  f.graph = random_graph(n, rng, opt);
  f.hidden = hidden;
  return f;
}

inline void finish_fixture(LayerFixture& f) {
  f.prepared = PreparedGraph{};
  f.prepared.graph = &f.graph;
  f.batch = make_batch({&f.prepared}, {});
}

}  // namespace detail

/// Finite-difference checks for every layer type on an n-node random graph.
/// Inputs x (and edge features where used) are registered as parameters so
/// their gradients are checked too.
inline std::vector<GradCase> layer_gradient_suite(std::uint64_t seed, std::size_t n = 8) {
  std::vector<GradCase> out;
  std::mt19937_64 rng(seed);
  const std::size_t h = 8;
  const DirectionMode modes[] = {{DirectionKind::kPlane, Combine::kMean},
                                 {DirectionKind::kDirected, Combine::kMean},
                                 {DirectionKind::kBidirected, Combine::kMean},
                                 {DirectionKind::kBidirected, Combine::kSum}};
  auto mode_tag = [](DirectionMode m) {
    std::string s(direction_name(m.kind));
    if (m.kind == DirectionKind::kBidirected) s += std::string("/") + std::string(combine_name(m.combine));
    return s;
  };

  for (const DirectionMode mode : modes) {
    // GIN and GINE.
    for (std::size_t edge_dim : {0u, 3u}) {
      auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, h, edge_dim));
      detail::finish_fixture(*fx);
      ad::ParamStore store(seed + 1);
      GinLayer layer(store, "gin", mode, h, edge_dim);
      store.add("x", n, h, fx->graph.node_features().data);
      if (edge_dim) store.add("e", fx->graph.num_edges(), edge_dim, fx->graph.edge_features()->data);
      auto f = [&](const ad::ParamStore& s) {
        LayerInput in;
        in.batch = &fx->batch;
        in.x = s.get("x");
        if (edge_dim) in.edge_attr = s.get("e");
        return probe_sum(layer.forward(in, nn::ForwardContext{}), 1);
      };
      out.push_back({std::string(edge_dim ? "gine " : "gin ") + mode_tag(mode), (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
    }
    // GCN with and without learned edge weights.
    for (std::size_t edge_dim : {0u, 2u}) {
      auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, h, edge_dim));
      detail::finish_fixture(*fx);
      ad::ParamStore store(seed + 2);
      GcnLayer layer(store, "gcn", mode, h, h, edge_dim);
      store.add("x", n, h, fx->graph.node_features().data);
      if (edge_dim) store.add("e", fx->graph.num_edges(), edge_dim, fx->graph.edge_features()->data);
      auto f = [&](const ad::ParamStore& s) {
        LayerInput in;
        in.batch = &fx->batch;
        in.x = s.get("x");
        if (edge_dim) in.edge_attr = s.get("e");
        return probe_sum(layer.forward(in, nn::ForwardContext{}), 2);
      };
      out.push_back({std::string(edge_dim ? "gcn+edge " : "gcn ") + mode_tag(mode), (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
    }
    // GAT with and without edge attention.
    for (std::size_t edge_dim : {0u, 2u}) {
      auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, h, edge_dim));
      detail::finish_fixture(*fx);
      ad::ParamStore store(seed + 3);
      GatLayer layer(store, "gat", mode, h, 2, edge_dim);
      store.add("x", n, h, fx->graph.node_features().data);
      if (edge_dim) store.add("e", fx->graph.num_edges(), edge_dim, fx->graph.edge_features()->data);
      auto f = [&](const ad::ParamStore& s) {
        LayerInput in;
        in.batch = &fx->batch;
        in.x = s.get("x");
        if (edge_dim) in.edge_attr = s.get("e");
        return probe_sum(layer.forward(in, nn::ForwardContext{}), 3);
      };
      out.push_back({std::string(edge_dim ? "gat+edge " : "gat ") + mode_tag(mode), (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
    }
    // GPS with plain GIN, and with GINE fed by EPE plus the attention bias.
    for (bool use_epe : {false, true}) {
      auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, h, 0));
      detail::finish_fixture(*fx);
      const auto basis = pe::make_epe_basis(pe::compute_pe_basis(fx->graph, 0.1, n));
      ad::ParamStore store(seed + 4);
      pe::EPENetworks nets;
      if (use_epe) nets = pe::EPENetworks(store, "epe", 2, 3);
      GpsLayer layer(store, "gps", mode, h, 2, use_epe ? 3 : 0, use_epe ? 3 : 0, 100);
      store.add("x", n, h, fx->graph.node_features().data);
      auto f = [&](const ad::ParamStore& s) {
        LayerInput in;
        in.batch = &fx->batch;
        in.x = s.get("x");
        std::vector<pe::EpeTensor> epe;
        if (use_epe) {
          epe.push_back(pe::epe(basis, nets));
          in.edge_attr = pe::epe_edge_slice(epe.front(), fx->graph);
          in.epe = &epe;
        }
        return probe_sum(layer.forward(in, nn::ForwardContext{}), 4);
      };
      out.push_back({std::string(use_epe ? "gps+epe " : "gps ") + mode_tag(mode), (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
    }
  }

  {
    // MagNet surrogate on a complex input.
    auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, h, 0));
    const auto prop = pe::magnetic_propagation(fx->graph, 0.25);
    ad::ParamStore store(seed + 5);
    MagnetLayer layer(store, "magnet", h, h);
    store.add("re", n, h, random_matrix(n, h, rng).data);
    store.add("im", n, h, random_matrix(n, h, rng).data);
    auto f = [&](const ad::ParamStore& s) {
      auto [re, im] = layer.forward(prop, s.get("re"), s.get("im"));
      return ad::add(probe_sum(re, 5), probe_sum(im, 6));
    };
    out.push_back({"magnet", (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
  }
  {
    // Dense attention with a trainable bias.
    ad::ParamStore store(seed + 6);
    AttentionLayer layer(store, "attn", h, 2, 100);
    store.add("x", n, h, random_matrix(n, h, rng).data);
    store.add("b0", n, n, random_matrix(n, n, rng).data);
    store.add("b1", n, n, random_matrix(n, n, rng).data);
    auto f = [&](const ad::ParamStore& s) {
      const std::vector<ad::Tensor> bias{s.get("b0"), s.get("b1")};
      return probe_sum(layer.forward(s.get("x"), &bias), 7);
    };
    out.push_back({"attention", (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
  }
  {
    // EPE networks (kappa and rho) through the edge slice and the bias.
    auto fx = std::make_unique<detail::LayerFixture>(detail::make_fixture(rng, n, 2, 0));
    const auto basis = pe::make_epe_basis(pe::compute_pe_basis(fx->graph, 0.25, 5));
    ad::ParamStore store(seed + 7);
    pe::EPENetworks nets(store, "epe", 4, 8);
    const ad::Tensor proj = ad::Tensor::constant(8, 2, random_matrix(8, 2, rng).data);
    auto f = [&](const ad::ParamStore&) {
      const auto t = pe::epe(basis, nets);
      ad::Tensor total = probe_sum(t.values, 8);
      total = ad::add(total, probe_sum(pe::epe_edge_slice(t, fx->graph), 9));
      for (const auto& b : pe::epe_attn_bias(t, proj)) total = ad::add(total, probe_sum(b, 10));
      return total;
    };
    out.push_back({"epe networks", (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
  }
  {
    // Readout heads: node-level and mean-pooled graph-level.
    ad::ParamStore store(seed + 8);
    nn::Mlp head(store, "head", {h, h, 3});
    store.add("x", n + 3, h, random_matrix(n + 3, h, rng).data);
    std::vector<std::size_t> node_graph(n + 3, 0);
    for (std::size_t i = n; i < n + 3; ++i) node_graph[i] = 1;
    const TaskSpec node_task = make_task(TaskLevel::kNode, Objective::kRegression, 3);
    const TaskSpec graph_task = make_task(TaskLevel::kGraph, Objective::kClassification, 3);
    auto f = [&](const ad::ParamStore& s) {
      const nn::ForwardContext ctx;
      return ad::add(probe_sum(readout(s.get("x"), node_task, head, node_graph, 2, ctx), 11),
                     probe_sum(readout(s.get("x"), graph_task, head, node_graph, 2, ctx), 12));
    };
    out.push_back({"heads", (jitter(store, rng), ad::grad_check(f, store, 1e-6))});
  }
  return out;
}

}  // namespace dgrl::testing
