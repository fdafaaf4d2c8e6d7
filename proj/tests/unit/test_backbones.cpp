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


#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dgrl/backbones.hpp"
#include "dgrl/error.hpp"
#include "dgrl/model.hpp"
#include "helpers.hpp"
#include "model_helpers.hpp"

using namespace dgrl;
using namespace dgrl::testing;

namespace {

const DirectionMode kPlane{DirectionKind::kPlane, Combine::kMean};
const DirectionMode kDirected{DirectionKind::kDirected, Combine::kMean};
const DirectionMode kBiMean{DirectionKind::kBidirected, Combine::kMean};
const DirectionMode kBiSum{DirectionKind::kBidirected, Combine::kSum};

struct Scalars {
  DirectedGraph graph;
  PreparedGraph prepared;
  GraphBatch batch;
};

std::unique_ptr<Scalars> scalar_graph(std::size_t n, std::vector<Edge> edges, std::vector<double> x) {
  auto s = std::make_unique<Scalars>();
  const std::size_t cols = x.size() / n;
  s->graph = build_graph(n, std::move(edges), RealMatrix(n, cols, std::move(x)));
  s->prepared.graph = &s->graph;
  s->batch = make_batch({&s->prepared}, {});
  return s;
}

LayerInput input_of(const Scalars& s) {
  LayerInput in;
  in.batch = &s.batch;
  in.x = s.batch.x;
  return in;
}

void identity_gin(const GinLayer& layer) {
  for (const auto& m : layer.message()) nn::assign_identity(m.weight());
  for (const auto& l : layer.mlp().layers()) {
    nn::assign_identity(l.weight());
    nn::assign_zero(l.bias());
  }
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected dgrl::Error");
  return ErrorCode::kIoError;
}

TaskSpec graph_regression() { return make_task(TaskLevel::kGraph, Objective::kRegression, 1, {"mse"}); }

ModelConfig config(Backbone b, DirectionMode mode, pe::PEMode pe_mode = pe::PEMode::kNone) {
  ModelConfig c;
  c.backbone = b;
  c.direction = mode;
  c.num_layers = 2;
  c.hidden_dim = 8;
  c.heads = 2;
  c.pe.mode = pe_mode;
  c.pe.d = 8;
  c.pe.m = 2;
  c.pe.c = 3;
  return c;
}

}  // namespace

TEST_CASE("direction names") {
  CHECK(parse_direction("plane") == DirectionKind::kPlane);
  CHECK(parse_direction("di") == DirectionKind::kDirected);
  CHECK(parse_direction("bidirected") == DirectionKind::kBidirected);
  CHECK(code_of([] { parse_direction("sideways"); }) == ErrorCode::kConfigError);
  CHECK(parse_combine("sum") == Combine::kSum);
  CHECK(direction_name(DirectionKind::kDirected) == "directed");
}

TEST_CASE("expand_direction examples") {
  const std::vector<Edge> e{{0, 1}};
  const auto plane = expand_direction(e, kPlane);
  REQUIRE(plane.size() == 1);
  CHECK(plane[0].tag == BranchTag::kShared);
  CHECK(plane[0].src == std::vector<std::size_t>{0, 1});
  CHECK(plane[0].dst == std::vector<std::size_t>{1, 0});

  const auto di = expand_direction(e, kDirected);
  REQUIRE(di.size() == 1);
  CHECK(di[0].tag == BranchTag::kForward);
  CHECK(di[0].src == std::vector<std::size_t>{0});
  CHECK(di[0].dst == std::vector<std::size_t>{1});

  const auto bi = expand_direction(e, kBiMean);
  REQUIRE(bi.size() == 2);
  CHECK(bi[0].tag == BranchTag::kForward);
  CHECK(bi[1].tag == BranchTag::kReverse);
  CHECK(bi[1].src == std::vector<std::size_t>{1});
  CHECK(bi[1].dst == std::vector<std::size_t>{0});
  CHECK(bi[1].param_set() == 1);
}

TEST_CASE("gin examples") {
  auto s = scalar_graph(2, {{0, 1}}, {1, 2});
  for (auto [mode, expect] : {std::pair{kPlane, std::vector<double>{3, 3}}, std::pair{kDirected, std::vector<double>{1, 3}}}) {
    ad::ParamStore store;
    GinLayer layer(store, "gin", mode, 1, 0);
    identity_gin(layer);
    CHECK(layer.forward(input_of(*s), {}).values() == expect);
  }
  auto empty = scalar_graph(2, {}, {1, 2});
  ad::ParamStore store(5);
  GinLayer layer(store, "gin", kBiMean, 1, 0);
  const auto x = empty->batch.x;
  CHECK(layer.forward(input_of(*empty), {}).values() == layer.mlp().forward(x, {}).values());
}

TEST_CASE("gcn examples") {
  auto one = scalar_graph(1, {}, {0.5, -2.0});
  ad::ParamStore store(1);
  GcnLayer single(store, "gcn1", kPlane, 2, 3, 0);
  const auto expect = ad::matmul(one->batch.x, single.theta()[0].weight());
  CHECK(max_abs_diff(single.forward(input_of(*one), {}).values(), expect.values()) < 1e-15);

  auto two = scalar_graph(2, {{0, 1}}, {1, 1});
  GcnLayer pair(store, "gcn2", kPlane, 1, 1, 0);
  nn::assign_identity(pair.theta()[0].weight());
  const auto out = pair.forward(input_of(*two), {}).values();
  CHECK(std::abs(out[0] - 1.0) < 1e-15);
  CHECK(std::abs(out[1] - 1.0) < 1e-15);

  std::mt19937_64 rng(2);
  auto g = std::make_unique<Scalars>();
  g->graph = random_graph(6, rng);
  g->prepared.graph = &g->graph;
  g->batch = make_batch({&g->prepared}, {});
  GcnLayer weighted(store, "gcn3", kBiMean, 3, 3, 0);
  const auto zero_w = ad::Tensor::zeros(g->graph.num_edges(), 1);
  const auto self_only = weighted.forward_weighted(input_of(*g), zero_w);
  const auto theta_avg = ad::scale(ad::add(ad::matmul(g->batch.x, weighted.theta()[0].weight()),
                                           ad::matmul(g->batch.x, weighted.theta()[1].weight())),
                                   0.5);
  CHECK(max_abs_diff(self_only.values(), theta_avg.values()) < 1e-14);
}

TEST_CASE("gat examples and attention rows") {
  std::mt19937_64 rng(3);
  // Node 0 has no incoming edge under DI: its softmax support is the self-loop alone.
  auto s = scalar_graph(3, {{0, 1}, {0, 2}, {1, 2}}, random_matrix(3, 4, rng).data);
  ad::ParamStore store(7);
  GatLayer gat(store, "gat", kDirected, 4, 2, 0);
  const auto out = gat.forward(input_of(*s), {}).to_matrix();
  const auto self = ad::matmul(s->batch.x, gat.params()[0].theta_s.weight()).to_matrix();
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out(0, c) - self(0, c)) < 1e-14);

  nn::assign_zero(gat.params()[0].a_s);
  nn::assign_zero(gat.params()[0].a_t);
  const auto [alphas, dst] = gat.attention(input_of(*s), 0);
  std::vector<double> support(3, 0.0);
  for (std::size_t d : dst) support[d] += 1.0;
  for (const auto& a : alphas) {
    for (std::size_t k = 0; k < dst.size(); ++k) CHECK(std::abs(a(k, 0) - 1.0 / support[dst[k]]) < 1e-15);
  }

  for (int trial = 0; trial < 10; ++trial) {
    auto g = std::make_unique<Scalars>();
    RandomGraphOptions opt;
    opt.node_features = 4;
    opt.edge_features = 2;
    g->graph = random_graph(7, rng, opt);
    g->prepared.graph = &g->graph;
    g->batch = make_batch({&g->prepared}, {});
    ad::ParamStore st(trial);
    GatLayer layer(st, "gat", kBiMean, 4, 2, 2);
    LayerInput in = input_of(*g);
    in.edge_attr = *g->batch.edge_features;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto [al, ds] = layer.attention(in, b);
      for (const auto& a : al) {
        std::vector<double> rows(7, 0.0);
        for (std::size_t k = 0; k < ds.size(); ++k) rows[ds[k]] += a(k, 0);
        for (double r : rows) CHECK(std::abs(r - 1.0) < 1e-12);
      }
    }
  }
  CHECK(code_of([&] { GatLayer(store, "bad", kPlane, 5, 2, 0); }) == ErrorCode::kInvalidCombo);
}

TEST_CASE("complex relu cases") {
  const auto re = ad::Tensor::constant(1, 5, {1, -1, 0, 0, 0});
  const auto im = ad::Tensor::constant(1, 5, {1, 0, -1, 1, 0});
  const auto [r, i] = complex_relu(re, im);
  CHECK(r.values() == std::vector<double>{1, 0, 0, 0, 0});
  CHECK(i.values() == std::vector<double>{1, 0, -1, 0, 0});
}

TEST_CASE("magnet examples") {
  std::mt19937_64 rng(4);
  // Symmetric graph, q = 0, real input and real-only weights stay real.
  auto g = random_graph(6, rng);
  std::vector<Edge> sym;
  for (const Edge& e : g.edges()) {
    sym.push_back(e);
  }
  for (const Edge& e : g.edges()) {
    if (std::find(sym.begin(), sym.end(), Edge{e.dst, e.src}) == sym.end()) sym.push_back({e.dst, e.src});
  }
  const auto sg = build_graph(6, sym, RealMatrix(6, 1));
  const auto prop = pe::magnetic_propagation(sg, 0.0);
  ad::ParamStore store(9);
  MagnetLayer layer(store, "mag", 4, 4);
  nn::assign_zero(layer.weight_im());
  const auto x = ad::Tensor::constant(6, 4, random_matrix(6, 4, rng).data);
  const auto [re, im] = layer.forward(prop, x, ad::Tensor::zeros(6, 4));
  for (double v : im.values()) CHECK(std::abs(v) < 1e-10);

  nn::assign_zero(layer.weight_re());
  nn::assign(layer.bias(), {0.5, -0.5, 0.0, 2.0});
  const auto [br, bi] = layer.forward(prop, x, x);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(br(r, 0) == 0.5);
    CHECK(bi(r, 0) == 0.5);
    CHECK(br(r, 1) == 0.0);
    CHECK(bi(r, 1) == 0.0);
    CHECK(br(r, 2) == 0.0);
    CHECK(br(r, 3) == 2.0);
  }
}

TEST_CASE("attention examples") {
  std::mt19937_64 rng(5);
  ad::ParamStore store(3);
  AttentionLayer attn(store, "attn", 4, 2, 10);
  const auto one = ad::Tensor::constant(1, 4, random_matrix(1, 4, rng).data);
  const auto expect = attn.output()(attn.value()(one));
  CHECK(max_abs_diff(attn.forward(one).values(), expect.values()) < 1e-15);

  const auto x = ad::Tensor::constant(5, 4, random_matrix(5, 4, rng).data);
  std::vector<double> mask(25, -1e9);
  for (std::size_t i = 0; i < 5; ++i) mask[i * 5 + i] = 0.0;
  const std::vector<ad::Tensor> bias(2, ad::Tensor::constant(5, 5, mask));
  for (const auto& p : attn.probabilities(x, &bias)) {
    for (std::size_t u = 0; u < 5; ++u) {
      for (std::size_t v = 0; v < 5; ++v) {
        if (u != v) CHECK(p(u, v) < 1e-6);
      }
    }
  }
  const std::vector<ad::Tensor> zero(2, ad::Tensor::zeros(5, 5));
  CHECK(attn.forward(x, &zero).values() == attn.forward(x).values());

  const auto big = ad::Tensor::zeros(11, 4);
  CHECK(code_of([&] { attn.forward(big); }) == ErrorCode::kNodeCapExceeded);
}

TEST_CASE("gps examples") {
  std::mt19937_64 rng(6);
  auto g = std::make_unique<Scalars>();
  RandomGraphOptions opt;
  opt.node_features = 4;
  g->graph = random_graph(6, rng, opt);
  g->prepared.graph = &g->graph;
  g->batch = make_batch({&g->prepared}, {});

  ad::ParamStore store(11);
  GpsLayer gps(store, "gps", kBiMean, 4, 2, 0, 0, 100);
  // Zero attention: X' = MLP(GIN(X)) exactly.
  for (const auto* l : {&gps.attention().query(), &gps.attention().key(), &gps.attention().value(),
                        &gps.attention().output()}) {
    nn::assign_zero(l->weight());
    nn::assign_zero(l->bias());
  }
  const auto in = input_of(*g);
  const auto expect = gps.mlp().forward(gps.mpnn().forward(in, {}), {});
  CHECK(gps.forward(in, {}).values() == expect.values());

  // Zero GIN output too: every row equals MLP(0).
  for (const auto& m : gps.mpnn().mlp().layers()) {
    nn::assign_zero(m.weight());
    nn::assign_zero(m.bias());
  }
  const auto rows = gps.forward(in, {}).to_matrix();
  const auto mlp0 = gps.mlp().forward(ad::Tensor::zeros(1, 4), {}).to_matrix();
  for (std::size_t r = 0; r < rows.rows; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(rows(r, c) == mlp0(0, c));
  }

  GpsLayer small(store, "gps_small", kBiMean, 4, 2, 0, 0, 5);
  CHECK(code_of([&] { small.forward(in, {}); }) == ErrorCode::kNodeCapExceeded);
}

TEST_CASE("readout examples") {
  ad::ParamStore store;
  nn::Mlp head(store, "head", {1, 1});
  nn::assign_identity(head.layers()[0].weight());
  const auto x = ad::Tensor::constant(2, 1, {1, 3});
  CHECK(readout(x, graph_regression(), head, {0, 0}, 1, {}).item() == 2.0);
  const auto node = readout(x, make_task(TaskLevel::kNode, Objective::kRegression, 1), head, {0, 0}, 1, {});
  CHECK(node.rows() == 2);
  CHECK(mean_pool(ad::Tensor::constant(3, 1, {1, 2, 6}), {0, 1, 1}, 2).values() == std::vector<double>{1, 4});
}

TEST_CASE("build_model bookkeeping and validation") {
  const FeatureDims dims{3, 0};
  auto cfg = config(Backbone::kGin, kBiMean, pe::PEMode::kNpe);
  const auto m = build_model(cfg, dims, graph_regression(), 1);
  CHECK(m.input_dim() == 3 + 2 * cfg.pe.d);
  CHECK(build_model(cfg, dims, graph_regression(), 1).params().num_scalars() == m.params().num_scalars());
  CHECK(build_model(cfg, dims, graph_regression(), 2).params().num_scalars() == m.params().num_scalars());

  const auto mag = build_model(config(Backbone::kMagnet, kDirected), dims, graph_regression());
  CHECK(mag.warnings().size() == 1);
  CHECK(mag.embedding_dim() == 16);

  CHECK(code_of([&] { build_model(config(Backbone::kMagnet, kPlane, pe::PEMode::kEpe), dims, graph_regression()); }) ==
        ErrorCode::kInvalidCombo);
  CHECK(code_of([&] { build_model(config(Backbone::kGine, kPlane), dims, graph_regression()); }) ==
        ErrorCode::kInvalidCombo);
  CHECK_NOTHROW(build_model(config(Backbone::kGine, kPlane), FeatureDims{3, 2}, graph_regression()));
  CHECK_NOTHROW(build_model(config(Backbone::kGine, kPlane, pe::PEMode::kEpe), dims, graph_regression()));
  CHECK(code_of([&] { build_model(config(Backbone::kGin, kPlane, pe::PEMode::kEpe), dims, graph_regression()); }) ==
        ErrorCode::kInvalidCombo);
  auto odd = config(Backbone::kGat, kPlane);
  odd.hidden_dim = 7;
  CHECK(code_of([&] { build_model(odd, dims, graph_regression()); }) == ErrorCode::kInvalidCombo);
  auto cheb = config(Backbone::kMagnet, kPlane);
  cheb.cheb_order = 2;
  CHECK(code_of([&] { build_model(cheb, dims, graph_regression()); }) == ErrorCode::kInvalidCombo);
  CHECK(parse_backbone("gps_t") == Backbone::kGpsT);
}

TEST_CASE("gps model refuses graphs above the cap") {
  auto cfg = config(Backbone::kGpsT, kBiMean);
  cfg.gps_node_cap = 5;
  const auto m = build_model(cfg, FeatureDims{3, 0}, graph_regression());
  std::mt19937_64 rng(1);
  const auto g = random_graph(6, rng);
  CHECK(code_of([&] { m.prepare(g); }) == ErrorCode::kNodeCapExceeded);
  CHECK_NOTHROW(m.prepare(random_graph(5, rng)));
}

TEST_CASE("every layer passes grad_check on 8-node graphs") {
  for (const auto& c : layer_gradient_suite(17)) {
    INFO(c.name << " err " << c.error);
    CHECK(c.error < 1e-4);
  }
}

TEST_CASE("BI with summed tied branches equals plane for GIN") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_graph(4 + trial, rng);
    auto plane = build_model(config(Backbone::kGin, kPlane), FeatureDims{3, 0}, graph_regression(), trial);
    auto bi = build_model(config(Backbone::kGin, kBiSum), FeatureDims{3, 0}, graph_regression(), trial + 100);
    tie_from_plane(plane, bi);
    CHECK(max_abs_diff(embed_graph(plane, g).data, embed_graph(bi, g).data) < 1e-12);
  }
}

TEST_CASE("DI on the inward star only changes the hub") {
  std::mt19937_64 rng(22);
  const auto star = inward_star(6, rng);
  const auto bare = build_graph(6, {}, star.node_features());
  const auto di = build_model(config(Backbone::kGin, kDirected), FeatureDims{3, 0}, graph_regression(), 4);
  const auto with = embed_graph(di, star);
  const auto without = embed_graph(di, bare);
  double hub = 0.0, rest = 0.0;
  for (std::size_t c = 0; c < with.cols; ++c) {
    hub = std::max(hub, std::abs(with(0, c) - without(0, c)));
    for (std::size_t r = 1; r < 6; ++r) rest = std::max(rest, std::abs(with(r, c) - without(r, c)));
  }
  CHECK(hub > 1e-6);
  CHECK(rest == 0.0);

  auto plane = build_model(config(Backbone::kGin, kPlane), FeatureDims{3, 0}, graph_regression(), 4);
  auto di_tied = build_model(config(Backbone::kGin, kDirected), FeatureDims{3, 0}, graph_regression(), 4);
  for (const auto& [name, t] : di_tied.params().entries()) {
    std::string src = name;
    if (auto pos = src.find(".fwd."); pos != std::string::npos) src.replace(pos, 5, ".shared.");
    nn::assign(t, plane.params().get(src).values());
  }
  CHECK(max_abs_diff(embed_graph(plane, star).data, embed_graph(di_tied, star).data) > 1e-6);
}

TEST_CASE("models are permutation equivariant in eval mode") {
  std::mt19937_64 rng(23);
  struct Combo {
    Backbone b;
    pe::PEMode pe;
    std::size_t edge;
  };
  const Combo combos[] = {{Backbone::kGcn, pe::PEMode::kNone, 0}, {Backbone::kGcn, pe::PEMode::kEpe, 0},
                          {Backbone::kGin, pe::PEMode::kNone, 0}, {Backbone::kGine, pe::PEMode::kNone, 2},
                          {Backbone::kGine, pe::PEMode::kEpe, 2}, {Backbone::kGat, pe::PEMode::kNone, 2},
                          {Backbone::kGat, pe::PEMode::kEpe, 0},  {Backbone::kMagnet, pe::PEMode::kNone, 0},
                          {Backbone::kGpsT, pe::PEMode::kNone, 0}, {Backbone::kGpsT, pe::PEMode::kEpe, 2}};
  for (const auto& combo : combos) {
    for (const DirectionMode mode : {kPlane, kDirected, kBiMean}) {
      RandomGraphOptions opt;
      opt.edge_features = combo.edge;
      const auto g = random_graph(8, rng, opt);
      const auto perm = random_permutation(8, rng);
      const auto pg = permute_graph(g, perm);
      const auto m = build_model(config(combo.b, mode, combo.pe), FeatureDims{3, combo.edge}, graph_regression(), 5);
      INFO(backbone_name(combo.b) << " " << pe::pe_mode_name(combo.pe) << " " << direction_name(mode.kind));
      CHECK(permuted_row_diff(embed_graph(m, g), embed_graph(m, pg), perm) < 1e-9);
      CHECK(max_abs_diff(predict_graphs(m, {g}).data, predict_graphs(m, {pg}).data) < 1e-12);
    }
  }
}

TEST_CASE("batching matches per-graph evaluation") {
  std::mt19937_64 rng(24);
  std::vector<DirectedGraph> graphs;
  for (int i = 0; i < 4; ++i) graphs.push_back(random_graph(3 + i, rng));
  for (Backbone b : {Backbone::kGin, Backbone::kGat, Backbone::kMagnet, Backbone::kGpsT}) {
    const auto m = build_model(config(b, kBiMean, b == Backbone::kGin ? pe::PEMode::kNpe : pe::PEMode::kNone),
                               FeatureDims{3, 0}, graph_regression(), 6);
    const auto together = predict_graphs(m, graphs);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      CHECK(std::abs(together(i, 0) - predict_graphs(m, {graphs[i]})(0, 0)) < 1e-12);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  auto m = build_model(config(Backbone::kGat, kBiMean), FeatureDims{3, 0}, graph_regression(), 8);
  const auto ck = make_checkpoint(m, "{\"echo\":1}", "rng");
  std::stringstream buf;
  write_checkpoint(ck, buf);
  const auto back = read_checkpoint(buf);
  CHECK(back.config_echo == ck.config_echo);
  CHECK(back.rng_state == "rng");
  CHECK(back.params == ck.params);

  auto fresh = build_model(config(Backbone::kGat, kBiMean), FeatureDims{3, 0}, graph_regression(), 99);
  apply_checkpoint(fresh, back);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(fresh.params().entries()[i].second.values() == m.params().entries()[i].second.values());
  }
  auto other = build_model(config(Backbone::kGin, kBiMean), FeatureDims{3, 0}, graph_regression(), 8);
  CHECK(code_of([&] { apply_checkpoint(other, back); }) == ErrorCode::kSchemaError);

  std::stringstream junk("NOTACKPT");
  CHECK_THROWS_AS(read_checkpoint(junk), Error);
}
